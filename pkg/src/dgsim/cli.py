"""Command-line entry point.

Settings resolve as: command-line flag > --config file (JSON or YAML) > DGSIM_* environment
variable > built-in default. Endpoints and API keys are read only from the config file or
the environment (DGSIM_LLM_BASE_URL, DGSIM_LLM_API_KEY, DGSIM_EMBED_BASE_URL, ...).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from collections import Counter, defaultdict
from pathlib import Path

from . import __version__
from .graph import GraphError, Manifest, epoch_to_day, load_edges, load_graph, load_nodes, make_splits, \
    TemporalGraph, write_edges, write_nodes, Interaction

EXIT_OK, EXIT_INVALID = 0, 1

DEFAULTS = {
    "task": "tdgg", "backend": "heuristic", "k1": 100, "seed": 0, "workers": 1, "split": "test",
    "forecaster": "moving-average", "activity_threshold": 0.0, "broadcast": None,
    "broadcast_category": None, "embedding": "trigram", "ratio": "0.15",
}
INTS = {"k1", "seed", "workers"}
FLOATS = {"activity_threshold"}


class CLIError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith((".yaml", ".yml")):
        import yaml
        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise CLIError(f"config {path} must be a mapping")
    return data


def resolve(args: argparse.Namespace, config: dict, name: str):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        value = config[name]
    else:
        env = os.environ.get(f"DGSIM_{name.upper()}")
        if env is None:
            return DEFAULTS.get(name)
        value = env
    if name in INTS:
        return int(value)
    if name in FLOATS:
        return float(value)
    return value


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default))


def _json_default(o):
    if isinstance(o, float) and math.isnan(o):
        return None
    return str(o)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _write_json(path: str | Path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _graph(args, config) -> tuple[TemporalGraph, Manifest | None]:
    nodes = args.nodes or config.get("nodes")
    edges = args.edges or config.get("edges")
    if not nodes or not edges:
        raise CLIError("--nodes and --edges are required")
    mpath = args.manifest or config.get("manifest")
    manifest = Manifest.load(mpath) if mpath else None
    return load_graph(nodes, edges, manifest), manifest


def _provider(config: dict, args):
    from .embedding import HashedTrigramEmbedder, RemoteEmbedder
    kind = resolve(args, config, "embedding")
    emb = config.get("embedding_options", {})
    if kind == "trigram":
        return HashedTrigramEmbedder(int(emb.get("dimension", 256)))
    if kind == "remote":
        if "dimension" not in emb:
            raise CLIError("remote embedding needs embedding_options.dimension")
        return RemoteEmbedder(emb.get("base_url"), emb.get("api_key"), **{k: v for k, v in emb.items()
                                                                          if k not in ("base_url", "api_key")})
    raise CLIError(f"unknown embedding provider {kind!r}")


def _chat_client(config: dict, seed: int):
    from .llm import ChatClient
    opts = dict(config.get("llm", {}))
    return ChatClient(opts.pop("base_url", None), opts.pop("api_key", None), seed=seed, **opts)


# -- commands --------------------------------------------------------------------

def cmd_ingest(args, config) -> int:
    nodes = load_nodes(args.nodes)
    edges = load_edges(args.edges) if args.time_unit == "day" else _epoch_edges(args.edges)
    manifest = Manifest.load(args.manifest) if args.manifest else Manifest()
    graph = TemporalGraph(nodes, edges, manifest.categories, manifest.horizon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_nodes(out / "nodes.jsonl", graph.nodes.values())
    write_edges(out / "edges.jsonl", graph.edges)
    Manifest(graph.horizon, list(graph.categories), manifest.split_ratio, manifest.extra).dump(out / "manifest.json")
    _emit({"nodes": len(graph.nodes), "edges": len(graph.edges), "horizon": graph.horizon,
           "categories": list(graph.categories), "out": str(out)})
    return EXIT_OK


def _epoch_edges(path) -> list[Interaction]:
    rows = _read_jsonl(path)
    days = epoch_to_day([float(r["t"]) for r in rows])
    return [Interaction(r["src"], r["dst"], d, str(r["message"]), r["category"]) for r, d in zip(rows, days)]


def cmd_split(args, config) -> int:
    ratio = args.ratio or config.get("ratio") or DEFAULTS["ratio"]
    if args.horizon is not None:
        horizon = args.horizon
    elif args.manifest:
        m = Manifest.load(args.manifest)
        if m.horizon is None:
            raise CLIError("manifest has no horizon")
        horizon, ratio = m.horizon, args.ratio or m.split_ratio
    else:
        raise CLIError("give --horizon or --manifest")
    spec = make_splits(horizon, ratio)
    if args.json:
        _emit(spec.as_dict())
    else:
        print(f"tau={spec.tau} input={spec.input_len} prediction={spec.tau} total={spec.horizon}")
        for name in ("train", "val", "test"):
            w = spec.window(name)
            print(f"{name}: input=[{w.input[0]}, {w.input[1]}) prediction=[{w.prediction[0]}, {w.prediction[1]})")
    return EXIT_OK


def _simulate(args, config, out: Path, broadcast: str | None):
    from .pipeline import RunConfig, Simulator, write_run
    from .policy import make_backend

    graph, manifest = _graph(args, config)
    split = make_splits(graph.horizon, (manifest.split_ratio if manifest else DEFAULTS["ratio"]))
    seed = resolve(args, config, "seed")
    cfg = RunConfig(
        task=resolve(args, config, "task"), backend=resolve(args, config, "backend"),
        k1=resolve(args, config, "k1"), activity_threshold=resolve(args, config, "activity_threshold"),
        seed=seed, broadcast=broadcast, broadcast_category=resolve(args, config, "broadcast_category"),
        workers=resolve(args, config, "workers"), forecaster=resolve(args, config, "forecaster"),
        forecaster_params=config.get("forecaster_params", {}), split=resolve(args, config, "split"),
    )
    if cfg.broadcast_category is not None and cfg.broadcast_category not in graph.categories:
        coerced = next((c for c in graph.categories if str(c) == str(cfg.broadcast_category)), None)
        if coerced is None:
            raise CLIError(f"broadcast category {cfg.broadcast_category!r} not in label set")
        cfg.broadcast_category = coerced
    kwargs = {}
    if cfg.backend == "llm":
        kwargs = {"client": _chat_client(config, seed), **config.get("llm_backend", {})}
    backend = make_backend(cfg.backend, reference=graph, **kwargs)
    result = Simulator(graph, split, cfg, backend, _provider(config, args)).run()
    write_run(result, out, graph, cfg, split, backend, {"dataset": config.get("dataset", "default")})
    return result


def cmd_simulate(args, config) -> int:
    out = Path(args.out or config.get("out") or "run")
    result = _simulate(args, config, out, resolve(args, config, "broadcast"))
    _emit({"out": str(out), "edges": len(result.edges), "failures": len(result.failures),
           "window": list(result.window)})
    return EXIT_OK


def cmd_counterfactual(args, config) -> int:
    message = resolve(args, config, "broadcast")
    if not message:
        raise CLIError("counterfactual needs --broadcast")
    out = Path(args.out or config.get("out") or "counterfactual")
    base = _simulate(args, config, out / "baseline", None)
    treat = _simulate(args, config, out / "broadcast", message)
    a, b = base.category_counts(), treat.category_counts()
    delta = {}
    for t in sorted(set(a) | set(b)):
        keys = sorted(set(a.get(t, {})) | set(b.get(t, {})))
        delta[str(t)] = {k: b.get(t, {}).get(k, 0) - a.get(t, {}).get(k, 0) for k in keys}
    totals = Counter()
    for d in delta.values():
        totals.update(d)
    changed = sum(1 for x, y in zip(base.edges, treat.edges) if x != y) + abs(len(base.edges) - len(treat.edges))
    summary = {"per_day": delta, "total": dict(sorted(totals.items())), "changed_edges": changed}
    _write_json(out / "diff.json", summary)
    _emit(summary)
    return EXIT_OK


def cmd_reward(args, config) -> int:
    from .rewards import CurriculumState, FrequencyScorer, Judge, score_batch

    graph, _ = _graph(args, config)
    scorer = FrequencyScorer().fit(graph.edges, graph.categories)
    rows = _read_jsonl(args.input)
    judge = Judge(_chat_client(config, resolve(args, config, "seed")),
                  workers=resolve(args, config, "workers")) if args.judge else None
    records = score_batch(rows, scorer, CurriculumState(args.step), judge)
    out = args.out or config.get("out")
    lines = [r.to_json() for r in records]
    if out:
        Path(out).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
        _emit({"records": len(records), "out": out})
    else:
        print("\n".join(lines))
    return EXIT_OK


def cmd_eval_tdgg(args, config) -> int:
    from .metrics.micro import SelectionSample, evaluate_micro

    run = Path(args.run)
    meta = json.loads((run / "run.json").read_text(encoding="utf-8"))
    if meta["config"]["task"] != "tdgg":
        raise CLIError(f"{run} is not a tdgg run")
    samples = [SelectionSample.make(r["u"], r["t"], r["truth"], r["candidates"])
               for r in _read_jsonl(run / "selection.jsonl")]
    probes = _read_jsonl(run / "edge_probes.jsonl")
    cats = [(p["pred_category"], p["true_category"]) for p in probes]
    texts = [(p["message"], p["reference"]) for p in probes]
    model = args.model or meta["backend"]
    rep = evaluate_micro(model, samples, cats, texts, _provider(config, args), k=args.k)
    data = {"kind": "micro", "dataset": args.dataset or meta.get("dataset", "default"), **rep.as_dict()}
    if args.out:
        _write_json(args.out, data)
    _emit(_clean(data))
    return EXIT_OK


def cmd_eval_idgg(args, config) -> int:
    from .activity import load_forecasts
    from .metrics.macro import evaluate_macro

    generated = load_edges(args.generated)
    reference = load_edges(args.reference)
    if not reference:
        raise CLIError("reference edge set is empty")
    pred = true = None
    if args.forecast:
        forecasts, start = load_forecasts(args.forecast)
        truth = defaultdict(int)
        for e in reference:
            truth[(e.src, e.t)] += 1
        pred, true = [], []
        for u, f in forecasts.items():
            for i, v in enumerate(f.values):
                pred.append(v)
                true.append(truth.get((u, start + i), 0))
    rep = evaluate_macro(args.model or Path(args.generated).stem, generated, reference,
                         pred_degrees=pred, true_degrees=true, seed=resolve(args, config, "seed"),
                         min_size=int(config.get("chamber_min_size", 5)),
                         cohesion=float(config.get("chamber_cohesion", 0.8)),
                         kol_ranking=config.get("kol_ranking", "pagerank"))
    data = {"kind": "macro", "dataset": args.dataset or "default", **rep.as_dict()}
    if args.out:
        _write_json(args.out, data)
    _emit(_clean(data))
    return EXIT_OK


def cmd_report(args, config) -> int:
    from .metrics.composite import (EDGE, PHENOMENON, SELECTION, STRUCTURE, compose_idgg, compose_tdgg,
                                    format_table, mean_ranks)

    files = sorted(Path(args.reports).glob("*.json"))
    reports = [json.loads(f.read_text(encoding="utf-8")) for f in files]
    reports = [r for r in reports if r.get("kind") in ("micro", "macro")]
    if not reports:
        raise CLIError(f"no model reports in {args.reports}")
    grouped: dict[tuple[str, str], dict[str, dict]] = defaultdict(dict)
    for r in reports:
        key = (r.get("dataset", "default"), r["kind"])
        if r["model"] in grouped[key]:
            raise CLIError(f"duplicate report for model {r['model']!r} on {key[0]} ({key[1]})")
        grouped[key][r["model"]] = {k: (math.nan if v is None else v) for k, v in r.items()}
    board, text = {}, []
    for (dataset, kind), models in sorted(grouped.items()):
        if kind == "micro":
            comp, first, second = compose_tdgg(models), SELECTION, EDGE
            cols = [c for c, _ in first + second] + ["S_sel", "S_edge", "S_TDGG", "rank_sel", "rank_edge"]
        else:
            comp, first, second = compose_idgg(models), STRUCTURE, PHENOMENON
            cols = [c for c, _ in first + second] + ["S_structure", "S_phenomenon", "S_IDGG",
                                                     "rank_structure", "rank_phenomenon"]
        r1, r2 = mean_ranks(models, first, args.rank_ties), mean_ranks(models, second, args.rank_ties)
        rows = {}
        for m in sorted(models):
            row = {c: models[m].get(c) for c, _ in first + second}
            row.update(comp[m])
            row[cols[-2]], row[cols[-1]] = r1[m], r2[m]
            rows[m] = row
        board.setdefault(dataset, {})[kind] = rows
        text.append(format_table(rows, cols, f"[{dataset}] {kind}"))
    out = Path(args.out or config.get("out") or args.reports)
    _write_json(out / "leaderboard.json", board)
    (out / "leaderboard.txt").write_text("\n".join(text), encoding="utf-8")
    print("\n".join(text))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _graph_flags(p):
    p.add_argument("--nodes", help="nodes JSONL (id, profile)")
    p.add_argument("--edges", help="edges JSONL (src, dst, t, message, category)")
    p.add_argument("--manifest", help="manifest JSON (horizon, categories, split.ratio)")


def _sim_flags(p):
    _graph_flags(p)
    p.add_argument("--task", choices=("tdgg", "idgg"))
    p.add_argument("--backend", choices=("heuristic", "replay", "llm"))
    p.add_argument("--k1", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--broadcast", help="broadcast message injected into every memory")
    p.add_argument("--broadcast-category", dest="broadcast_category")
    p.add_argument("--workers", type=int)
    p.add_argument("--forecaster", choices=("persistence", "moving-average", "autoregressive"))
    p.add_argument("--activity-threshold", dest="activity_threshold", type=float)
    p.add_argument("--split", choices=("train", "val", "test"))
    p.add_argument("--embedding", choices=("trigram", "remote"))
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dgsim", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", help="JSON or YAML config file")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="validate and canonicalize a dataset")
    _graph_flags(p)
    p.add_argument("--time-unit", choices=("day", "epoch"), default="day")
    p.add_argument("--out", required=True)

    p = sub.add_parser("split", help="print chronological split windows")
    p.add_argument("--horizon", type=int)
    p.add_argument("--manifest")
    p.add_argument("--ratio")
    p.add_argument("--json", action="store_true")

    _sim_flags(sub.add_parser("simulate", help="run the generation pipeline"))
    _sim_flags(sub.add_parser("counterfactual", help="baseline vs broadcast-injected paired runs"))

    p = sub.add_parser("reward", help="score edge-generation rewards for a batch")
    _graph_flags(p)
    p.add_argument("--input", required=True, help="JSONL rows with src, dst, pred_category, true_category")
    p.add_argument("--step", type=int, default=0, help="curriculum step")
    p.add_argument("--judge", action="store_true", help="score messages with the configured chat model")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")

    p = sub.add_parser("eval-tdgg", help="micro metrics for a tdgg run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--model")
    p.add_argument("--dataset")
    p.add_argument("--embedding", choices=("trigram", "remote"))
    p.add_argument("--out")

    p = sub.add_parser("eval-idgg", help="macro metrics of a generated vs reference edge file")
    p.add_argument("--generated", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--forecast", help="forecast JSONL for degree-distribution divergences")
    p.add_argument("--model")
    p.add_argument("--dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("report", help="normalize model reports into leaderboards")
    p.add_argument("--reports", required=True)
    p.add_argument("--rank-ties", dest="rank_ties", choices=("min", "average"), default="min",
                   help="tied models share their best position (min) or the mean position")
    p.add_argument("--out")
    return ap


COMMANDS = {
    "ingest": cmd_ingest, "split": cmd_split, "simulate": cmd_simulate, "counterfactual": cmd_counterfactual,
    "reward": cmd_reward, "eval-tdgg": cmd_eval_tdgg, "eval-idgg": cmd_eval_idgg, "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        return COMMANDS[args.command](args, config)
    except (CLIError, GraphError, ValueError, KeyError, OSError) as exc:
        err = {"error": str(exc).strip("'\""), "type": type(exc).__name__, "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
