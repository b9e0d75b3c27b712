"""Temporal text-attributed graph storage, windowing, splits and memory views.

Day intervals are half-open ``[start, stop)`` everywhere.
"""
from __future__ import annotations

import bisect
import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

NodeId = int | str

SECONDS_PER_DAY = 86400


class GraphError(ValueError):
    """Raised for malformed or inconsistent graph input."""


class UnknownNodeError(GraphError, KeyError):
    pass


def node_key(node: NodeId) -> tuple:
    """Total order over mixed int/str ids: ints first (numeric), then strings."""
    return (isinstance(node, str), node)


@dataclass(frozen=True)
class NodeProfile:
    id: NodeId
    profile: str = ""


@dataclass(frozen=True)
class Interaction:
    src: NodeId
    dst: NodeId
    t: int
    message: str
    category: int | str

    def to_record(self) -> dict:
        return {"src": self.src, "dst": self.dst, "t": self.t,
                "message": self.message, "category": self.category}


@dataclass(frozen=True)
class MemoryEntry:
    dst: NodeId
    dst_profile: str
    message: str
    category: int | str
    t: int
    broadcast_id: str | None = None


@dataclass(frozen=True)
class NodeMemory:
    owner: NodeId
    cut: int
    entries: tuple[MemoryEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def restrict_to(self, dst: NodeId) -> "NodeMemory":
        """Entries towards ``dst`` plus any injected broadcasts."""
        return NodeMemory(self.owner, self.cut,
                          tuple(e for e in self.entries if e.dst == dst or e.broadcast_id is not None))


@dataclass(frozen=True)
class Window:
    input: tuple[int, int]
    prediction: tuple[int, int]


@dataclass(frozen=True)
class SplitSpec:
    horizon: int
    tau: int
    input_len: int
    train: Window
    val: Window
    test: Window

    def window(self, name: str) -> Window:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {
            "horizon": self.horizon, "tau": self.tau, "input_len": self.input_len,
            **{name: {"input": list(w.input), "prediction": list(w.prediction)}
               for name, w in (("train", self.train), ("val", self.val), ("test", self.test))},
        }


def make_splits(horizon: int, ratio: float | str = "0.15") -> SplitSpec:
    """Chronological train/val/test windows with tau = floor(ratio * horizon).

    Each window has an input history of ``horizon - 3*tau`` days followed by
    ``tau`` prediction days; val and test are shifted by tau and 2*tau.
    """
    frac = Fraction(str(ratio))
    tau = (frac.numerator * horizon) // frac.denominator
    if tau < 1:
        raise GraphError(f"horizon {horizon} too short: tau would be {tau}")
    input_len = horizon - 3 * tau
    if input_len < 1:
        raise GraphError(f"horizon {horizon} leaves no input history")

    def shifted(offset: int) -> Window:
        return Window((offset, offset + input_len),
                      (offset + input_len, offset + input_len + tau))

    return SplitSpec(horizon, tau, input_len, shifted(0), shifted(tau), shifted(2 * tau))


class TemporalGraph:
    """Immutable directed multigraph of time-stamped text interactions."""

    def __init__(self, nodes: Iterable[NodeProfile], edges: Iterable[Interaction],
                 categories: Sequence | None = None, horizon: int | None = None):
        node_map: dict[NodeId, NodeProfile] = {}
        for n in nodes:
            if n.id in node_map:
                raise GraphError(f"duplicate node id {n.id!r}")
            if n.profile is None:
                raise GraphError(f"node {n.id!r} has no profile")
            node_map[n.id] = n
        self._nodes = {k: node_map[k] for k in sorted(node_map, key=node_key)}

        edges = list(edges)
        for e in edges:
            for end in (e.src, e.dst):
                if end not in self._nodes:
                    raise GraphError(f"dangling endpoint {end!r} in edge {e.src!r}->{e.dst!r}")
            if e.t < 0:
                raise GraphError(f"negative timestamp {e.t}")
        if categories is None:
            categories = sorted({e.category for e in edges}, key=node_key)
        else:
            label_set = set(categories)
            for e in edges:
                if e.category not in label_set:
                    raise GraphError(f"unknown category {e.category!r}")
        self.categories: tuple = tuple(categories)

        order = sorted(range(len(edges)),
                       key=lambda i: (edges[i].t, node_key(edges[i].src), node_key(edges[i].dst), i))
        self._edges: tuple[Interaction, ...] = tuple(edges[i] for i in order)
        self._times = [e.t for e in self._edges]

        max_t = self._times[-1] if self._times else -1
        if horizon is None:
            horizon = max_t + 1
        if horizon < max_t + 1:
            raise GraphError(f"horizon {horizon} does not cover edge day {max_t}")
        self.horizon = horizon

        self._out: dict[NodeId, list[int]] = defaultdict(list)
        for i, e in enumerate(self._edges):
            self._out[e.src].append(i)

    # -- accessors ---------------------------------------------------------
    @property
    def nodes(self) -> dict[NodeId, NodeProfile]:
        return self._nodes

    @property
    def edges(self) -> tuple[Interaction, ...]:
        return self._edges

    def node_ids(self) -> list[NodeId]:
        return list(self._nodes)

    def __contains__(self, node: NodeId) -> bool:
        return node in self._nodes

    def profile(self, node: NodeId) -> str:
        self._require(node)
        return self._nodes[node].profile

    def _require(self, node: NodeId) -> None:
        if node not in self._nodes:
            raise UnknownNodeError(f"unknown node {node!r}")

    def out_edges(self, node: NodeId, start: int = 0, stop: int | None = None) -> list[Interaction]:
        self._require(node)
        stop = self.horizon if stop is None else stop
        return [self._edges[i] for i in self._out.get(node, ()) if start <= self._edges[i].t < stop]

    # -- derived graphs ----------------------------------------------------
    def before(self, cut: int) -> "TemporalGraph":
        """Same nodes, only the edges strictly before ``cut``."""
        return TemporalGraph(self._nodes.values(), self.window((0, cut)), self.categories, self.horizon)

    def with_edges(self, extra: Iterable[Interaction]) -> "TemporalGraph":
        return TemporalGraph(self._nodes.values(), list(self._edges) + list(extra),
                             self.categories, self.horizon)

    def window(self, interval: tuple[int, int]) -> list[Interaction]:
        """Edges with ``start <= t < stop``, in canonical order."""
        start, stop = interval
        lo = bisect.bisect_left(self._times, start)
        hi = bisect.bisect_left(self._times, stop)
        return list(self._edges[lo:max(lo, hi)])

    def __repr__(self) -> str:
        return f"TemporalGraph(|V|={len(self._nodes)}, |E|={len(self._edges)}, horizon={self.horizon})"


def node_memory(graph: TemporalGraph, u: NodeId, cut: int) -> NodeMemory:
    """Past outgoing interactions of ``u`` strictly before day ``cut``."""
    entries = tuple(
        MemoryEntry(e.dst, graph.nodes[e.dst].profile, e.message, e.category, e.t)
        for e in graph.out_edges(u, 0, cut)
    )
    return NodeMemory(u, cut, entries)


def out_degree_series(graph: TemporalGraph, u: NodeId, interval: tuple[int, int]) -> list[int]:
    start, stop = interval
    counts = [0] * max(0, stop - start)
    for e in graph.out_edges(u, start, stop):
        counts[e.t - start] += 1
    return counts


def degree_matrix(graph: TemporalGraph, interval: tuple[int, int]) -> tuple[list[NodeId], "np.ndarray"]:
    """Per-node daily out-degree counts, rows in canonical node order."""
    import numpy as np

    ids = graph.node_ids()
    row = {n: i for i, n in enumerate(ids)}
    start, stop = interval
    mat = np.zeros((len(ids), max(0, stop - start)), dtype=np.int64)
    for e in graph.window(interval):
        mat[row[e.src], e.t - start] += 1
    return ids, mat


def epoch_to_day(epochs: Sequence[float]) -> list[int]:
    """Bin raw epoch seconds into day indices offset to the first day present."""
    days = [int(x // SECONDS_PER_DAY) for x in epochs]
    if not days:
        return []
    first = min(days)
    return [d - first for d in days]


# -- file I/O ------------------------------------------------------------------

def _read_jsonl(path: Path, required: Sequence[str]) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GraphError(f"{path}:{lineno}: parse error: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise GraphError(f"{path}:{lineno}: expected an object")
            missing = [k for k in required if k not in rec]
            if missing:
                raise GraphError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
            rec["_line"] = lineno
            rows.append(rec)
    return rows


@dataclass
class Manifest:
    horizon: int | None = None
    categories: list | None = None
    split_ratio: str = "0.15"
    extra: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(
            horizon=data.get("horizon"),
            categories=data.get("categories"),
            split_ratio=str(data.get("split", {}).get("ratio", "0.15")),
            extra={k: v for k, v in data.items() if k not in ("horizon", "categories", "split")},
        )

    def dump(self, path: str | Path) -> None:
        data = {"horizon": self.horizon, "categories": self.categories,
                "split": {"ratio": self.split_ratio}, **self.extra}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, ensure_ascii=False)
            fh.write("\n")


def load_nodes(path: str | Path) -> list[NodeProfile]:
    return [NodeProfile(r["id"], r["profile"] if r["profile"] is not None else "")
            for r in _read_jsonl(Path(path), ("id", "profile"))]


def load_edges(path: str | Path) -> list[Interaction]:
    edges = []
    for r in _read_jsonl(Path(path), ("src", "dst", "t", "message", "category")):
        t = r["t"]
        if not isinstance(t, int) or isinstance(t, bool):
            raise GraphError(f"{path}:{r['_line']}: t must be an integer day index")
        edges.append(Interaction(r["src"], r["dst"], t, str(r["message"]), r["category"]))
    return edges


def load_graph(nodes_path: str | Path, edges_path: str | Path,
               manifest: Manifest | str | Path | None = None) -> TemporalGraph:
    if manifest is not None and not isinstance(manifest, Manifest):
        manifest = Manifest.load(manifest)
    nodes = load_nodes(nodes_path)
    edges = load_edges(edges_path)
    return TemporalGraph(nodes, edges,
                         categories=manifest.categories if manifest else None,
                         horizon=manifest.horizon if manifest else None)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def write_nodes(path: str | Path, nodes: Iterable[NodeProfile]) -> None:
    write_jsonl(path, ({"id": n.id, "profile": n.profile} for n in nodes))


def write_edges(path: str | Path, edges: Iterable[Interaction]) -> None:
    write_jsonl(path, (e.to_record() for e in edges))
