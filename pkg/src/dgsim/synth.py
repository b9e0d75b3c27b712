"""Seeded synthetic social-interaction dataset with community structure and heavy-tailed activity."""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from .graph import Interaction, Manifest, NodeProfile, TemporalGraph, write_edges, write_nodes

TOPICS = ("astronomy", "baking", "cycling", "databases", "economics", "folk music", "gardening", "hiking")
TRAITS = ("curious", "skeptical", "cheerful", "formal", "witty", "patient", "blunt", "chatty")
VERBS = ("asks about", "replies on", "shares a link on", "praises a post on", "argues about")
CATEGORIES = (0, 1, 2)


def make_synthetic_dataset(n_nodes: int = 200, horizon: int = 30, n_communities: int = 5,
                           seed: int = 0, mean_rate: float = 0.6, in_community: float = 0.85,
                           categories=CATEGORIES) -> TemporalGraph:
    rng = np.random.default_rng(seed)
    community = np.arange(n_nodes) % n_communities
    nodes = []
    for i in range(n_nodes):
        topic = TOPICS[community[i] % len(TOPICS)]
        trait = TRAITS[rng.integers(len(TRAITS))]
        nodes.append(NodeProfile(i, f"user{i} is a {trait} member who follows {topic} "
                                    f"and posts as handle u{i:03d}x{rng.integers(1000):03d}"))
    # heavy-tailed activity and popularity
    rate = mean_rate * rng.pareto(2.5, n_nodes) * 1.5 + 0.05
    popularity = rng.pareto(1.5, n_nodes) + 0.1
    members = [np.flatnonzero(community == c) for c in range(n_communities)]
    edges = []
    for t in range(horizon):
        for u in range(n_nodes):
            k = min(int(rng.poisson(rate[u])), 8)
            chosen: set[int] = set()
            for _ in range(k):
                pool = members[community[u]] if rng.random() < in_community else np.arange(n_nodes)
                w = popularity[pool].copy()
                mask = (pool == u) | np.isin(pool, list(chosen))
                w[mask] = 0.0
                if w.sum() == 0:
                    continue
                v = int(rng.choice(pool, p=w / w.sum()))
                chosen.add(v)
                same = community[u] == community[v]
                cat = categories[(0 if same else 1) if rng.random() < 0.8 else int(rng.integers(len(categories)))]
                topic = TOPICS[community[v] % len(TOPICS)]
                msg = f"user{u} {VERBS[rng.integers(len(VERBS))]} {topic} with user{v} on day {t}"
                edges.append(Interaction(u, v, t, msg, cat))
    return TemporalGraph(nodes, edges, list(categories), horizon)


def write_dataset(graph: TemporalGraph, out_dir: str | Path) -> tuple[Path, Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = (out / "nodes.jsonl", out / "edges.jsonl", out / "manifest.json")
    write_nodes(paths[0], graph.nodes.values())
    write_edges(paths[1], graph.edges)
    Manifest(graph.horizon, list(graph.categories)).dump(paths[2])
    return paths


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m dgsim.synth", description="write a synthetic dataset")
    ap.add_argument("--out", required=True)
    ap.add_argument("--nodes", type=int, default=200)
    ap.add_argument("--horizon", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    g = make_synthetic_dataset(args.nodes, args.horizon, seed=args.seed)
    for p in write_dataset(g, args.out):
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
