"""Day-by-day simulation loop for the transductive and inductive generation tasks."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from . import prompts
from .activity import DegreeForecast, Forecaster, active_sources, dump_forecasts, make_forecaster
from .destination import ProfileIndex, StatsIndex, retrieve_candidates, truncate_to_k2
from .embedding import EmbeddingProvider, HashedTrigramEmbedder
from .graph import (Interaction, MemoryEntry, NodeId, NodeMemory, SplitSpec, TemporalGraph, degree_matrix,
                    node_key, node_memory, write_edges, write_jsonl)
from .policy import PolicyBackend

log = logging.getLogger(__name__)

BROADCAST_DST = "__broadcast__"
BROADCASTER_PROFILE = "[broadcast] A platform-wide announcement delivered to every user."


@dataclass
class RunConfig:
    task: str = "tdgg"
    backend: str = "heuristic"
    k1: int = 100
    activity_threshold: float = 0.0
    seed: int = 0
    broadcast: str | None = None
    broadcast_category: int | str | None = None
    broadcast_id: str = "broadcast-0"
    workers: int = 1
    forecaster: str = "moving-average"
    forecaster_params: dict = field(default_factory=dict)
    split: str = "test"
    edge_probe: bool = True
    neighbor_context: int = 10

    def __post_init__(self):
        if self.task not in ("tdgg", "idgg"):
            raise ValueError(f"task must be tdgg or idgg, not {self.task!r}")
        if self.k1 < 1:
            raise ValueError("k1 must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.broadcast is not None and not self.broadcast.strip():
            raise ValueError("broadcast message must be non-empty")


@dataclass
class GeneratedGraph:
    edges: list[Interaction]
    window: tuple[int, int]
    selection: list[dict] = field(default_factory=list)
    probes: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    forecasts: dict[NodeId, DegreeForecast] | None = None
    metadata: dict = field(default_factory=dict)

    def category_counts(self) -> dict[int, dict[str, int]]:
        out: dict[int, Counter] = {}
        for e in self.edges:
            out.setdefault(e.t, Counter())[str(e.category)] += 1
        return {t: dict(sorted(c.items())) for t, c in sorted(out.items())}


def inject_broadcast(memories: Mapping[NodeId, NodeMemory], message: str, category, broadcast_id: str,
                     t: int) -> dict[NodeId, NodeMemory]:
    """Add one broadcast entry per memory at day ``t``; re-injecting the same id is a no-op."""
    if not message or not message.strip():
        raise ValueError("broadcast message must be non-empty")
    out = {}
    for u, mem in memories.items():
        if any(e.broadcast_id == broadcast_id for e in mem.entries):
            out[u] = mem
            continue
        entry = MemoryEntry(BROADCAST_DST, BROADCASTER_PROFILE, message, category, t, broadcast_id)
        pos = next((i for i, e in enumerate(mem.entries) if e.t > t), len(mem.entries))
        out[u] = NodeMemory(mem.owner, mem.cut, mem.entries[:pos] + (entry,) + mem.entries[pos:])
    return out


def assemble(edges) -> list[Interaction]:
    return sorted(edges, key=lambda e: (e.t, node_key(e.src), node_key(e.dst), e.category, e.message))


def _neighbor_context(view: TemporalGraph, stats: StatsIndex, u: NodeId, cut: int, limit: int) -> str:
    if limit <= 0:
        return ""
    lines = []
    for w in stats.neighbors(u):
        for e in view.out_edges(w, 0, cut)[-2:]:
            if e.dst != u:
                lines.append(f"- {view.nodes[e.dst].profile}")
    return "\n".join(lines[-limit:])


class Simulator:
    def __init__(self, graph: TemporalGraph, split: SplitSpec, config: RunConfig, backend: PolicyBackend,
                 provider: EmbeddingProvider | None = None, forecaster: Forecaster | None = None):
        self.graph = graph
        self.split = split
        self.config = config
        self.backend = backend
        self.provider = provider or HashedTrigramEmbedder()
        self.forecaster = forecaster
        self.index = ProfileIndex(graph, self.provider)
        self.window = split.window(config.split)
        self.start, self.stop = self.window.prediction
        self.labels = list(graph.categories)
        self.broadcast_category = config.broadcast_category
        if config.broadcast and self.broadcast_category is None:
            self.broadcast_category = self.labels[0] if self.labels else 0

    # -- per-day budgets -------------------------------------------------------
    def true_budgets(self) -> list[dict[NodeId, float]]:
        days = [Counter() for _ in range(self.start, self.stop)]
        for e in self.graph.window((self.start, self.stop)):
            days[e.t - self.start][e.src] += 1
        return [{u: float(c[u]) for u in sorted(c, key=node_key)} for c in days]

    def forecast_budgets(self) -> tuple[list[dict[NodeId, float]], dict[NodeId, DegreeForecast]]:
        fc = self.forecaster or make_forecaster(self.config.forecaster, **self.config.forecaster_params)
        ids, mat = degree_matrix(self.graph, self.window.input)
        if fc.name != "fixed":
            fc.fit({u: mat[i] for i, u in enumerate(ids)})
        else:
            fc.fit()
        horizon = self.stop - self.start
        forecasts = fc.predict_all(horizon)
        active = active_sources(forecasts, self.config.activity_threshold)
        budgets = [{u: forecasts[u].values[d] for u in active[d]} if d < len(active) else {}
                   for d in range(horizon)]
        return budgets, forecasts

    # -- one source ------------------------------------------------------------
    def _memory(self, view: TemporalGraph, u: NodeId, day: int) -> NodeMemory:
        mem = node_memory(view, u, day)
        if self.config.broadcast:
            mem = inject_broadcast({u: mem}, self.config.broadcast, self.broadcast_category,
                                   self.config.broadcast_id, self.start - 1)[u]
        return mem

    def _source(self, view: TemporalGraph, stats: StatsIndex, u: NodeId, day: int, budget: float,
                truth: list[NodeId], probe_edges: list[Interaction]) -> dict:
        out = {"edges": [], "selection": None, "probes": [], "failure": None}
        src = view.nodes[u]
        try:
            mem = self._memory(view, u, day)
            ctx = _neighbor_context(view, stats, u, day, self.config.neighbor_context)
            plan = self.backend.propose_query(src, mem, ctx, n_dst=int(round(budget)))
            cands = retrieve_candidates(plan, view, u, day, self.config.k1, index=self.index, stats=stats)
            for v in truncate_to_k2(cands, budget):
                draft = self.backend.propose_edge(src, view.nodes[v], mem.restrict_to(v), self.labels)
                out["edges"].append(Interaction(u, v, day, draft.message, draft.category))
            if truth:
                out["selection"] = {"u": u, "t": day, "truth": truth, "candidates": list(cands.ids),
                                    "format_ok": plan.valid}
            for ref in probe_edges:
                draft = self.backend.propose_edge(src, view.nodes[ref.dst], mem.restrict_to(ref.dst), self.labels)
                out["probes"].append({"src": u, "dst": ref.dst, "t": day, "pred_category": draft.category,
                                      "true_category": ref.category, "message": draft.message,
                                      "reference": ref.message, "format_ok": draft.valid})
        except Exception as exc:  # recorded, the run continues
            log.warning("source %r day %d failed: %s", u, day, exc)
            out["failure"] = {"u": u, "t": day, "error": f"{type(exc).__name__}: {exc}"}
        return out

    # -- main loop -------------------------------------------------------------
    def run(self) -> GeneratedGraph:
        cfg = self.config
        if cfg.task == "tdgg":
            budgets, forecasts = self.true_budgets(), None
        else:
            budgets, forecasts = self.forecast_budgets()
        history = self.graph.window((0, self.start))
        future = self.graph.window((self.start, self.stop))
        generated: list[Interaction] = []
        result = GeneratedGraph([], (self.start, self.stop), forecasts=forecasts)
        pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
        try:
            for d, day in enumerate(range(self.start, self.stop)):
                view = TemporalGraph(self.graph.nodes.values(), history + generated, self.graph.categories,
                                     self.graph.horizon)
                stats = StatsIndex(view, day)
                todays = [e for e in future if e.t == day]
                jobs = []
                for u, budget in budgets[d].items():
                    mine = [e for e in todays if e.src == u]
                    truth = list(dict.fromkeys(e.dst for e in mine))
                    probes = mine if (cfg.task == "tdgg" and cfg.edge_probe) else []
                    jobs.append((view, stats, u, day, budget, truth if cfg.task == "tdgg" else [], probes))
                outs = pool.map(lambda a: self._source(*a), jobs) if pool else (self._source(*a) for a in jobs)
                day_edges = []
                for o in outs:
                    day_edges += o["edges"]
                    if o["selection"]:
                        result.selection.append(o["selection"])
                    result.probes += o["probes"]
                    if o["failure"]:
                        result.failures.append(o["failure"])
                generated += day_edges
        finally:
            if pool:
                pool.shutdown()
        result.edges = assemble(generated)
        return result


def run_tdgg(graph, split, config, backend, provider=None) -> GeneratedGraph:
    config.task = "tdgg"
    return Simulator(graph, split, config, backend, provider).run()


def run_idgg(graph, split, config, backend, provider=None, forecaster=None) -> GeneratedGraph:
    config.task = "idgg"
    return Simulator(graph, split, config, backend, provider, forecaster).run()


def graph_digest(graph: TemporalGraph) -> str:
    h = hashlib.sha256()
    for n in graph.nodes.values():
        h.update(json.dumps([n.id, n.profile], ensure_ascii=False).encode())
    for e in graph.edges:
        h.update(json.dumps(e.to_record(), sort_keys=True, ensure_ascii=False).encode())
    return h.hexdigest()


def write_run(result: GeneratedGraph, out_dir: str | Path, graph: TemporalGraph, config: RunConfig,
              split: SplitSpec, backend: PolicyBackend, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edges(out / "edges.jsonl", result.edges)
    write_edges(out / "reference.jsonl", graph.window(result.window))
    if config.task == "tdgg":
        write_jsonl(out / "selection.jsonl", result.selection)
        write_jsonl(out / "edge_probes.jsonl", result.probes)
    if result.forecasts is not None:
        dump_forecasts(out / "forecast.jsonl", result.forecasts, result.window[0])
    write_jsonl(out / "failures.jsonl", result.failures)
    manifest = {
        "config": asdict(config),
        "backend": backend.kind,
        "window": list(result.window),
        "split": split.as_dict(),
        "categories": list(graph.categories),
        "input_digest": graph_digest(graph),
        "prompt_digest": prompts.digest(),
        "edges": len(result.edges),
        "category_counts": {str(t): c for t, c in result.category_counts().items()},
        "failures": len(result.failures),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        **(extra or {}),
    }
    with open(out / "run.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False, default=str)
        fh.write("\n")
    return out
