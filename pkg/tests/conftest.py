import pytest

from dgsim.graph import Interaction, NodeProfile, TemporalGraph, make_splits
from dgsim.synth import make_synthetic_dataset


@pytest.fixture(scope="session")
def synthetic():
    return make_synthetic_dataset(n_nodes=200, horizon=30, seed=0)


@pytest.fixture(scope="session")
def synthetic_split(synthetic):
    return make_splits(synthetic.horizon)


@pytest.fixture
def five_nodes():
    """Small hand-checkable graph; node 0 talks to 1 twice and 2 once before day 3."""
    nodes = [
        NodeProfile(0, "coffee lover who writes about espresso"),
        NodeProfile(1, "mountain biker sharing trail maps"),
        NodeProfile(2, "jazz pianist posting chord charts"),
        NodeProfile(3, "gardener growing heirloom tomatoes"),
        NodeProfile(4, "astronomer photographing nebulae"),
    ]
    edges = [
        Interaction(0, 1, 0, "nice trail", "like"),
        Interaction(0, 1, 1, "want to ride?", "reply"),
        Interaction(0, 2, 2, "great chords", "like"),
        Interaction(1, 2, 0, "love this", "like"),
        Interaction(1, 3, 1, "tomato tips?", "reply"),
        Interaction(2, 1, 2, "thanks", "reply"),
        Interaction(0, 3, 3, "seed swap", "reply"),
        Interaction(0, 4, 4, "what lens?", "reply"),
        Interaction(3, 4, 4, "clear skies", "like"),
    ]
    return TemporalGraph(nodes, edges, ["like", "reply"], horizon=5)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
