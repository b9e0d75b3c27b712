"""Cross-model min-max normalization, composite scores and mean ranks."""
from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

# (field, higher_is_better) in leaderboard column order
SELECTION = (("recall_easy", True), ("recall_hard", True), ("recall_all", True))
EDGE = (("acc", True), ("rouge_l", True), ("token_f1", True))
STRUCTURE = (("mmd_degree", False), ("mmd_clustering", False), ("mmd_spectral", False),
             ("edge_overlap", True))
PHENOMENON = (("p_at_100_kol", True), ("delta_chambers", False), ("delta_alpha", False))


def minmax_normalize(values: Sequence[float], higher_better: bool = True) -> list[float]:
    """(x - min) / (max - min), reversed for lower-better metrics; max == min gives 1.0.

    NaN entries are skipped when finding the range and stay NaN.
    """
    arr = np.asarray(values, dtype=np.float64)
    finite = arr[~np.isnan(arr)]
    if finite.size == 0:
        return [math.nan] * len(arr)
    lo, hi = float(finite.min()), float(finite.max())
    if hi == lo:
        return [math.nan if math.isnan(x) else 1.0 for x in arr]
    norm = (arr - lo) / (hi - lo)
    if not higher_better:
        norm = 1.0 - norm
    return [float(x) for x in norm]


def _field(report, name: str) -> float:
    v = report.get(name) if isinstance(report, Mapping) else getattr(report, name)
    return math.nan if v is None else float(v)


def _group_mean(models: Sequence[str], reports: Mapping, columns) -> dict[str, float]:
    cols = [minmax_normalize([_field(reports[m], f) for m in models], hb) for f, hb in columns]
    out = {}
    for i, m in enumerate(models):
        vals = [c[i] for c in cols if not math.isnan(c[i])]
        out[m] = sum(vals) / len(vals) if vals else math.nan
    return out


def _compose(reports: Mapping, first, second, names) -> dict[str, dict[str, float]]:
    if not reports:
        raise ValueError("no model reports")
    models = sorted(reports)
    a = _group_mean(models, reports, first)
    b = _group_mean(models, reports, second)
    return {m: {names[0]: a[m], names[1]: b[m], names[2]: 0.5 * a[m] + 0.5 * b[m]} for m in models}


def compose_tdgg(reports: Mapping) -> dict[str, dict[str, float]]:
    return _compose(reports, SELECTION, EDGE, ("S_sel", "S_edge", "S_TDGG"))


def compose_idgg(reports: Mapping) -> dict[str, dict[str, float]]:
    return _compose(reports, STRUCTURE, PHENOMENON, ("S_structure", "S_phenomenon", "S_IDGG"))


def mean_ranks(reports: Mapping, columns, ties: str = "min") -> dict[str, float]:
    """Per-model mean of per-metric ranks (1 = best).

    ``ties="min"`` gives tied models the best position they occupy; ``"average"`` the mean.
    """
    if ties not in ("min", "average"):
        raise ValueError(f"unknown tie rule {ties!r}")
    models = sorted(reports)
    ranks = []
    for f, hb in columns:
        vals = np.array([_field(reports[m], f) for m in models])
        if np.isnan(vals).all():
            continue
        key = np.where(np.isnan(vals), np.inf, -vals if hb else vals)
        ranks.append(rankdata(key, method=ties))
    if not ranks:
        return {m: math.nan for m in models}
    mean = np.mean(ranks, axis=0)
    return {m: float(r) for m, r in zip(models, mean)}


def format_table(rows: Mapping[str, Mapping[str, float]], columns: Sequence[str], title: str = "") -> str:
    header = ["model"] + list(columns)
    body = [[m] + [("nan" if v is None or math.isnan(v) else f"{v:.4f}")
                   for v in (rows[m].get(c) for c in columns)] for m in sorted(rows)]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = [title] if title else []
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines) + "\n"
