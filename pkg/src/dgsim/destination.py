"""Two-stage destination retrieval, behavior filtering and K2 truncation."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingProvider, HashedTrigramEmbedder, cosine_scores
from .graph import Interaction, NodeId, TemporalGraph, UnknownNodeError
from .policy import QueryPlan


@dataclass(frozen=True)
class BehaviorStats:
    SF: float = 0.0
    AFN: float = 0.0
    HI: float = 0.0
    CN: float = 0.0


class StatsIndex:
    """Behavior statistics for every (u, v) pair from edges strictly before ``cut``."""

    def __init__(self, graph: TemporalGraph, cut: int):
        self.graph = graph
        self.cut = cut
        self._counts: dict[NodeId, Counter] = defaultdict(Counter)
        for e in graph.window((0, cut)):
            self._counts[e.src][e.dst] += 1
        self._sf = {u: sum(c.values()) for u, c in self._counts.items()}
        self._nbrs = {u: set(c) for u, c in self._counts.items()}
        self._afn = {
            u: sum(self._sf.get(w, 0) for w in nb) / len(nb) for u, nb in self._nbrs.items()
        }

    def neighbors(self, u: NodeId) -> list[NodeId]:
        """Distinct out-neighbors in first-contact order."""
        return list(self._counts.get(u, {}))

    def stats(self, u: NodeId, v: NodeId) -> BehaviorStats:
        for n in (u, v):
            if n not in self.graph:
                raise UnknownNodeError(f"unknown node {n!r}")
        nu = self._nbrs.get(u)
        if not nu:
            return BehaviorStats()
        return BehaviorStats(
            SF=float(self._sf[u]),
            AFN=float(self._afn[u]),
            HI=float(self._counts[u].get(v, 0)),
            CN=float(len(nu & self._nbrs.get(v, set()))),
        )


def behavior_stats(graph: TemporalGraph, u: NodeId, v: NodeId, cut: int) -> BehaviorStats:
    return StatsIndex(graph, cut).stats(u, v)


class ProfileIndex:
    """Precomputed profile embeddings for all nodes, rows in canonical node order."""

    def __init__(self, graph: TemporalGraph, provider: EmbeddingProvider):
        self.provider = provider
        self.ids = graph.node_ids()
        self.row = {n: i for i, n in enumerate(self.ids)}
        self.matrix = provider.embed_many([graph.nodes[n].profile for n in self.ids])

    def rank(self, query: np.ndarray, subset: Iterable[NodeId]) -> list[NodeId]:
        """``subset`` by descending cosine to ``query``; ties by canonical id order."""
        rows = np.array(sorted(self.row[n] for n in subset), dtype=np.int64)
        if rows.size == 0:
            return []
        scores = cosine_scores(query, self.matrix[rows])
        order = np.argsort(-scores, kind="stable")
        return [self.ids[rows[i]] for i in order]


@dataclass(frozen=True)
class CandidateList:
    ids: tuple[NodeId, ...] = ()
    provenance: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.ids)


def retrieve_candidates(plan: QueryPlan, graph: TemporalGraph, u: NodeId, cut: int, k1: int = 100,
                        provider: EmbeddingProvider | None = None, *, index: ProfileIndex | None = None,
                        stats: StatsIndex | None = None) -> CandidateList:
    """Pinned ids, then u's past out-neighbors, then filtered strangers; each stage ranked by cosine."""
    if k1 < 1:
        raise ValueError("k1 must be >= 1")
    if u not in graph:
        raise UnknownNodeError(f"unknown node {u!r}")
    if index is None:
        index = ProfileIndex(graph, provider or HashedTrigramEmbedder())
    if stats is None or stats.cut != cut:
        stats = StatsIndex(graph, cut)
    query = index.provider.embed(plan.query_text)

    ids: list[NodeId] = []
    prov: list[str] = []
    seen = {u}

    def extend(ranked: Iterable[NodeId], tag: str) -> None:
        for n in ranked:
            if len(ids) >= k1:
                return
            if n not in seen:
                seen.add(n)
                ids.append(n)
                prov.append(tag)

    extend((n for n in plan.pinned if n in graph), "replay")
    extend(index.rank(query, (n for n in stats.neighbors(u) if n not in seen)), "neighbor")
    if len(ids) < k1:
        pool = [n for n in index.ids if n not in seen and plan.filter.matches(stats.stats(u, n))]
        extend(index.rank(query, pool), "general")
    return CandidateList(tuple(ids), tuple(prov))


def truncate_to_k2(candidates: CandidateList | Sequence[NodeId], d_hat: float) -> list[NodeId]:
    if d_hat < 0:
        raise ValueError("d_hat must be >= 0")
    ids = candidates.ids if isinstance(candidates, CandidateList) else tuple(candidates)
    return list(ids[:int(round(d_hat))])


def reward_dst(candidate_lists: Sequence[CandidateList | Sequence[NodeId]],
               truths: Sequence[Iterable[NodeId]], format_ok: bool) -> float:
    """1[format_ok] plus the number of true destinations found in each window's K1 list."""
    if len(candidate_lists) != len(truths):
        raise ValueError("candidate lists and truths are not aligned")
    hits = 0
    for cands, truth in zip(candidate_lists, truths):
        pool = set(cands.ids if isinstance(cands, CandidateList) else cands)
        hits += sum(1 for v in set(truth) if v in pool)
    return float(format_ok) + hits


def true_destinations(edges: Iterable[Interaction], u: NodeId, day: int) -> list[NodeId]:
    seen: dict[NodeId, None] = {}
    for e in edges:
        if e.src == u and e.t == day:
            seen.setdefault(e.dst)
    return list(seen)
