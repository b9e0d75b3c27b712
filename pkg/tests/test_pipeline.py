import json
from collections import Counter

import pytest

from dgsim.activity import FixedForecaster
from dgsim.graph import Interaction, TemporalGraph, make_splits, node_memory
from dgsim.pipeline import (BROADCAST_DST, GeneratedGraph, RunConfig, Simulator, assemble, inject_broadcast,
                            run_idgg, run_tdgg, write_run)
from dgsim.policy import FilterRule, HeuristicBackend, QueryPlan, ReplayBackend


def _records(edges):
    return sorted((e.t, e.src, e.dst, str(e.category), e.message) for e in edges)


def _true_daily_degrees(graph, window):
    start, stop = window
    out = {u: [0.0] * (stop - start) for u in graph.node_ids()}
    for e in graph.window(window):
        out[e.src][e.t - start] += 1
    return out


class OpenFilter(HeuristicBackend):
    """Heuristic queries without a filter, so every node is a candidate."""

    def propose_query(self, src, memory, neighbor_context="", n_dst=1):
        plan = super().propose_query(src, memory, neighbor_context, n_dst)
        return QueryPlan(plan.query_text, FilterRule(()))


class Spy(HeuristicBackend):
    def __init__(self, fail_on=None):
        super().__init__()
        self.calls = []
        self.fail_on = fail_on

    def propose_query(self, src, memory, neighbor_context="", n_dst=1):
        if src.id == self.fail_on:
            raise RuntimeError("boom")
        self.calls.append((memory.cut, src.id, len(memory)))
        return super().propose_query(src, memory, neighbor_context, n_dst)


def test_replay_tdgg_reproduces_reference(synthetic, synthetic_split):
    res = run_tdgg(synthetic, synthetic_split, RunConfig(), ReplayBackend(synthetic))
    ref = synthetic.window(synthetic_split.test.prediction)
    assert res.window == synthetic_split.test.prediction
    assert _records(res.edges) == _records(ref)
    assert not res.failures
    assert len(res.probes) == len(ref)
    assert all(p["pred_category"] == p["true_category"] for p in res.probes)
    assert all(set(s["truth"]) <= set(s["candidates"]) for s in res.selection)


def test_exact_forecast_with_replay_reproduces_reference(synthetic, synthetic_split):
    w = synthetic_split.test
    fc = FixedForecaster(_true_daily_degrees(synthetic, w.prediction))
    res = run_idgg(synthetic, synthetic_split, RunConfig(), ReplayBackend(synthetic), forecaster=fc)
    assert _records(res.edges) == _records(synthetic.window(w.prediction))
    assert not res.selection and not res.probes


def test_heuristic_is_deterministic_and_thread_safe(synthetic, synthetic_split):
    a = run_idgg(synthetic, synthetic_split, RunConfig(seed=7), HeuristicBackend())
    b = run_idgg(synthetic, synthetic_split, RunConfig(seed=7, workers=4), HeuristicBackend())
    assert a.edges and a.edges == b.edges
    assert a.edges == assemble(reversed(a.edges))


def test_persistence_budget_sets_edge_count(synthetic, synthetic_split):
    w = synthetic_split.test
    last = w.input[1] - 1
    per_node = Counter(e.src for e in synthetic.edges if e.t == last)
    res = run_idgg(synthetic, synthetic_split, RunConfig(forecaster="persistence"), OpenFilter())
    assert len(res.edges) == sum(per_node.values()) * synthetic_split.tau
    assert Counter(e.src for e in res.edges) == Counter({u: c * synthetic_split.tau for u, c in per_node.items()})


def test_zero_budget_generates_nothing(synthetic, synthetic_split):
    fc = FixedForecaster({u: [0.0] * 4 for u in synthetic.node_ids()})
    res = run_idgg(synthetic, synthetic_split, RunConfig(), HeuristicBackend(), forecaster=fc)
    assert res.edges == [] and res.failures == []
    assert res.category_counts() == {}


def test_sources_follow_daily_active_sets(five_nodes):
    split = make_splits(10, "0.1")  # tau=1, input=7
    graph = TemporalGraph(five_nodes.nodes.values(), five_nodes.edges, five_nodes.categories, 10)
    fc = FixedForecaster({0: [1.0], 3: [0.0], 2: [2.0]})
    spy = Spy()
    Simulator(graph, split, RunConfig(task="idgg"), spy, forecaster=fc).run()
    assert sorted(c[1] for c in spy.calls) == [0, 2]


def test_generated_edges_feed_later_days(synthetic, synthetic_split):
    spy = Spy()
    run_idgg(synthetic, synthetic_split, RunConfig(forecaster="persistence"), spy)
    seen = {}
    for cut, u, size in spy.calls:
        if u in seen:
            assert size >= seen[u][1] and cut > seen[u][0]
        seen[u] = (cut, size)
    grew = [u for u in seen if sum(1 for c in spy.calls if c[1] == u) > 1]
    sizes = {u: [s for _, v, s in spy.calls if v == u] for u in grew}
    assert any(s[-1] > s[0] for s in sizes.values())


def test_failures_are_recorded(synthetic, synthetic_split):
    budgets = _true_daily_degrees(synthetic, synthetic_split.test.prediction)
    victim = next(u for u, v in budgets.items() if sum(v) > 0)
    res = run_idgg(synthetic, synthetic_split, RunConfig(), Spy(fail_on=victim), forecaster=FixedForecaster(budgets))
    assert res.failures and {f["u"] for f in res.failures} == {victim}
    assert "RuntimeError: boom" in res.failures[0]["error"]
    assert res.edges and all(e.src != victim for e in res.edges)


def test_inject_broadcast(five_nodes):
    mem = {0: node_memory(five_nodes, 0, 4), 4: node_memory(five_nodes, 4, 4)}
    once = inject_broadcast(mem, "new feature!", "like", "b1", 2)
    assert len(once[0]) == len(mem[0]) + 1 and len(once[4]) == 1
    assert [e.t for e in once[0].entries] == sorted(e.t for e in once[0].entries)
    entry = next(e for e in once[0].entries if e.broadcast_id == "b1")
    assert entry.dst == BROADCAST_DST and entry.t == 2
    assert inject_broadcast(once, "new feature!", "like", "b1", 2) == once
    assert len(inject_broadcast(once, "second", "like", "b2", 3)[0]) == len(mem[0]) + 2
    with pytest.raises(ValueError):
        inject_broadcast(mem, "  ", "like", "b1", 2)


def test_broadcast_shifts_heuristic_categories(synthetic, synthetic_split):
    base = run_idgg(synthetic, synthetic_split, RunConfig(forecaster="persistence"), OpenFilter())
    cfg = RunConfig(forecaster="persistence", broadcast="try the new reply button", broadcast_category=2)
    cf = run_idgg(synthetic, synthetic_split, cfg, OpenFilter())
    count = lambda r: Counter(e.category for e in r.edges)
    assert len(cf.edges) == len(base.edges)
    assert count(cf)[2] > count(base)[2]


def test_category_counts_and_assemble():
    edges = [Interaction(2, 1, 1, "b", 0), Interaction(1, 2, 0, "a", 1), Interaction(1, 3, 1, "c", 0)]
    g = GeneratedGraph(assemble(edges), (0, 2))
    assert [(e.t, e.src) for e in g.edges] == [(0, 1), (1, 1), (1, 2)]
    assert g.category_counts() == {0: {"1": 1}, 1: {"0": 2}}


def test_run_config_validation():
    for bad in (dict(task="x"), dict(k1=0), dict(workers=0), dict(broadcast=" ")):
        with pytest.raises(ValueError):
            RunConfig(**bad)


def test_write_run(tmp_path, synthetic, synthetic_split):
    cfg = RunConfig()
    backend = ReplayBackend(synthetic)
    res = run_tdgg(synthetic, synthetic_split, cfg, backend)
    out = write_run(res, tmp_path / "run", synthetic, cfg, synthetic_split, backend)
    for name in ("edges.jsonl", "reference.jsonl", "selection.jsonl", "edge_probes.jsonl", "failures.jsonl"):
        assert (out / name).exists()
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["edges"] == len(res.edges) and manifest["backend"] == "replay"
    assert manifest["window"] == list(synthetic_split.test.prediction)
    assert (out / "edges.jsonl").read_text() == (out / "reference.jsonl").read_text()
