"""Inductive evaluation: distribution distances and social-phenomenon statistics of a generated graph."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from .. import kernels
from ..graph import Interaction, NodeId, node_key

KINDS = ("degree", "clustering", "spectral")


# -- MMD --------------------------------------------------------------------------

@dataclass(frozen=True)
class StatSample:
    kind: str
    values: tuple[float, ...]
    # per-value probability mass; None means uniform
    weights: tuple[float, ...] | None = None

    def as_weighted(self) -> tuple[np.ndarray, np.ndarray]:
        v = np.asarray(self.values, dtype=np.float64)
        if self.weights is None:
            return _collapse(v)
        return _collapse(v, np.asarray(self.weights, dtype=np.float64))


def _collapse(values: np.ndarray, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Merge repeated values; returns sorted unique values and weights summing to 1."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite sample values")
    if weights is None:
        weights = np.ones_like(values)
    uniq, inv = np.unique(values, return_inverse=True)
    w = np.bincount(inv, weights=weights, minlength=uniq.size)
    total = w.sum()
    if total <= 0:
        raise ValueError("sample weights must be positive")
    return uniq, w / total


def _as_weighted(sample) -> tuple[np.ndarray, np.ndarray, float]:
    """(unique values, probability weights, raw sample size)."""
    if isinstance(sample, StatSample):
        return (*sample.as_weighted(), float(len(sample.values)))
    if isinstance(sample, tuple) and len(sample) == 2 and not np.isscalar(sample[0]) \
            and np.ndim(sample[0]) == 1 and np.shape(sample[0]) == np.shape(sample[1]):
        vals = np.asarray(sample[0], dtype=np.float64)
        return (*_collapse(vals, np.asarray(sample[1], dtype=np.float64)), float(vals.size))
    vals = np.asarray(sample, dtype=np.float64).ravel()
    return (*_collapse(vals), float(vals.size))


def median_pairwise_distance(values, counts=None, exact_limit: int = 4096) -> float:
    """Median of |x_i - x_j| over unordered pairs i < j; ``counts`` are per-value multiplicities."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if counts is None:
        uniq, mult = np.unique(v, return_counts=True)
        mult = mult.astype(np.float64)
    else:
        uniq, inv = np.unique(v, return_inverse=True)
        mult = np.bincount(inv, weights=np.asarray(counts, dtype=np.float64), minlength=uniq.size)
    if uniq.size > exact_limit:
        # evenly spaced order statistics keep the estimate deterministic
        pick = np.linspace(0, uniq.size - 1, exact_limit).round().astype(np.int64)
        uniq, mult = uniq[pick], mult[pick]
    if mult.sum() < 2:
        return 0.0
    iu = np.triu_indices(uniq.size, k=1)
    dist = np.concatenate([[0.0], np.abs(uniq[iu[0]] - uniq[iu[1]])])
    pair_mult = np.concatenate([[float((mult * (mult - 1) / 2).sum())], mult[iu[0]] * mult[iu[1]]])
    order = np.argsort(dist, kind="stable")
    dist, cum = dist[order], np.cumsum(pair_mult[order])
    total = cum[-1]

    def at(pos: float) -> float:
        # value at 0-based position ``pos`` of the sorted multiset
        return float(dist[min(np.searchsorted(cum, pos + 0.5), dist.size - 1)])

    return 0.5 * (at(math.floor((total - 1) / 2)) + at(math.ceil((total - 1) / 2)))


def _bandwidth(bandwidth, *samples) -> float:
    if bandwidth == "median":
        vals = np.concatenate([s[0] for s in samples])
        mult = np.concatenate([s[1] * s[2] for s in samples])
        sigma = median_pairwise_distance(vals, mult)
        return sigma if sigma > 0 else 1.0
    sigma = float(bandwidth)
    if not sigma > 0:
        raise ValueError("bandwidth must be positive")
    return sigma


def mmd2_rbf(x, y, bandwidth: float | str = "median") -> float:
    """Squared MMD with k(a, b) = exp(-(a - b)^2 / (2 sigma^2)) between two 1-D samples.

    Samples may be raw values, ``(values, weights)`` pairs or ``StatSample``s.
    ``bandwidth="median"`` uses the median pairwise distance of the pooled samples.
    """
    a, b = _as_weighted(x), _as_weighted(y)
    # fixed operand order keeps the result exactly symmetric
    if (a[0].tolist(), a[1].tolist(), a[2]) > (b[0].tolist(), b[1].tolist(), b[2]):
        a, b = b, a
    sigma = _bandwidth(bandwidth, a, b)
    # distances in bandwidth units; squaring a tiny sigma would underflow
    xa, xb = a[0] / sigma, b[0] / sigma
    kxx = kernels.rbf_cross_sum(xa, a[1], xa, a[1], 0.5)
    kyy = kernels.rbf_cross_sum(xb, b[1], xb, b[1], 0.5)
    kxy = kernels.rbf_cross_sum(xa, a[1], xb, b[1], 0.5)
    return float(kxx + kyy - 2.0 * kxy)


# -- graph statistics --------------------------------------------------------------

def _pairs(edges: Iterable) -> list[tuple[NodeId, NodeId]]:
    out = []
    for e in edges:
        out.append((e.src, e.dst) if isinstance(e, Interaction) else (e[0], e[1]))
    return out


def undirected_projection(edges: Iterable, nodes: Iterable[NodeId] | None = None) -> nx.Graph:
    """Simple undirected graph over the given nodes (default: nodes touched by an edge); self-loops dropped."""
    pairs = _pairs(edges)
    g = nx.Graph()
    if nodes is None:
        nodes = {n for p in pairs for n in p}
    g.add_nodes_from(sorted(nodes, key=node_key))
    g.add_edges_from(sorted(((u, v) for u, v in pairs if u != v),
                            key=lambda p: (node_key(p[0]), node_key(p[1]))))
    return g


def _lanczos_quadrature(mat: sp.spmatrix, steps: int, probes: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stochastic Lanczos quadrature: Ritz values and weights approximating the spectral density."""
    n = mat.shape[0]
    steps = min(steps, n)
    rng = np.random.default_rng(seed)
    values, weights = [], []
    for _ in range(probes):
        v = rng.choice([-1.0, 1.0], size=n) / math.sqrt(n)
        basis = np.zeros((steps, n))
        alpha, beta = np.zeros(steps), np.zeros(steps)
        basis[0] = v
        k = steps
        for j in range(steps):
            w = mat @ basis[j]
            alpha[j] = basis[j] @ w
            w -= alpha[j] * basis[j] + (beta[j - 1] * basis[j - 1] if j else 0.0)
            w -= basis[:j + 1].T @ (basis[:j + 1] @ w)
            if j + 1 < steps:
                beta[j] = np.linalg.norm(w)
                if beta[j] < 1e-10:
                    k = j + 1
                    break
                basis[j + 1] = w / beta[j]
        tri = np.diag(alpha[:k]) + np.diag(beta[:k - 1], 1) + np.diag(beta[:k - 1], -1)
        theta, vecs = np.linalg.eigh(tri)
        values.append(theta)
        weights.append(vecs[0] ** 2 / probes)
    return np.clip(np.concatenate(values), 0.0, 2.0), np.concatenate(weights)


def graph_stats(edges: Iterable, kind: str, nodes: Iterable[NodeId] | None = None, *,
                exact_spectral_max: int = 2000, lanczos_steps: int = 80, lanczos_probes: int = 8,
                seed: int = 0) -> StatSample:
    if kind not in KINDS:
        raise ValueError(f"unknown statistic {kind!r}")
    g = edges if isinstance(edges, nx.Graph) else undirected_projection(edges, nodes)
    if g.number_of_nodes() == 0:
        raise ValueError("empty graph")
    order = list(g.nodes)
    if kind == "degree":
        return StatSample(kind, tuple(float(g.degree(n)) for n in order))
    if kind == "clustering":
        cc = nx.clustering(g)
        return StatSample(kind, tuple(float(cc[n]) for n in order))
    lap = nx.normalized_laplacian_matrix(g, nodelist=order).astype(np.float64)
    if g.number_of_nodes() <= exact_spectral_max:
        eig = np.linalg.eigvalsh(lap.toarray())
        return StatSample(kind, tuple(float(x) for x in np.clip(eig, 0.0, 2.0)))
    vals, wts = _lanczos_quadrature(lap.tocsr(), lanczos_steps, lanczos_probes, seed)
    return StatSample(kind, tuple(vals.tolist()), tuple(wts.tolist()))


def edge_overlap(generated: Iterable, reference: Iterable) -> float:
    """Share of reference (src, dst) pairs reproduced, counting multiplicity up to the reference's."""
    ref = Counter(_pairs(reference))
    if not ref:
        raise ValueError("empty reference edge set")
    gen = Counter(_pairs(generated))
    return sum(min(c, gen.get(p, 0)) for p, c in ref.items()) / sum(ref.values())


# -- PageRank / KOL -------------------------------------------------------------

class ConvergenceError(RuntimeError):
    pass


def pagerank(edges: Iterable, nodes: Iterable[NodeId] | None = None, damping: float = 0.85,
             tol: float = 1e-9, max_iter: int = 1000) -> dict[NodeId, float]:
    """Power iteration on the multiplicity-weighted directed graph; dangling mass spread uniformly.

    Stops when the L1 change drops below ``tol`` (scaled by node count).
    """
    pairs = _pairs(edges)
    if nodes is None:
        nodes = {n for p in pairs for n in p}
    ids = sorted(set(nodes), key=node_key)
    if not ids:
        raise ValueError("empty graph")
    n = len(ids)
    row = {v: i for i, v in enumerate(ids)}
    src = np.array([row[u] for u, _ in pairs], dtype=np.int64)
    dst = np.array([row[v] for _, v in pairs], dtype=np.int64)
    w = sp.csr_matrix((np.ones(len(pairs)), (src, dst)), shape=(n, n))
    out = np.asarray(w.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.divide(1.0, out, out=np.zeros_like(out), where=~dangling)
    trans = (sp.diags(inv) @ w).T.tocsr()
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = damping * (trans @ x + x[dangling].sum() / n) + (1.0 - damping) / n
        nxt /= nxt.sum()
        if np.abs(nxt - x).sum() < n * tol:
            return {v: float(s) for v, s in zip(ids, nxt)}
        x = nxt
    raise ConvergenceError(f"pagerank did not converge in {max_iter} iterations")


def top_nodes(scores: dict[NodeId, float], k: int) -> list[NodeId]:
    return sorted(scores, key=lambda v: (-round(scores[v], 12), node_key(v)))[:k]


def _degree_scores(edges: Iterable) -> dict[NodeId, float]:
    c: Counter = Counter()
    for u, v in _pairs(edges):
        c[u] += 1
        c[v] += 1
    return {k: float(x) for k, x in c.items()}


def p_at_100_kol(generated: Sequence, reference: Sequence, k: int = 100, ranking: str = "pagerank") -> float:
    """Overlap of the top-k key nodes of both graphs, divided by min(k, reference node count)."""
    rank = pagerank if ranking == "pagerank" else _degree_scores if ranking == "degree" else None
    if rank is None:
        raise ValueError(f"unknown KOL ranking {ranking!r}")
    ref = rank(reference)
    if not ref:
        raise ValueError("empty reference graph")
    kk = min(k, len(ref))
    gen = rank(generated) if _pairs(generated) else {}
    return len(set(top_nodes(ref, kk)) & set(top_nodes(gen, kk))) / kk


# -- echo chambers ---------------------------------------------------------------

def echo_chambers(edges: Iterable, min_size: int = 5, cohesion: float = 0.8) -> int:
    """Modularity communities with at least ``min_size`` members whose incident edges are mostly internal."""
    g = edges if isinstance(edges, nx.Graph) else undirected_projection(edges)
    if g.number_of_edges() == 0:
        return 0
    count = 0
    for com in nx.community.greedy_modularity_communities(g):
        if len(com) < min_size:
            continue
        internal = g.subgraph(com).number_of_edges()
        boundary = nx.cut_size(g, com)
        if internal and internal / (internal + boundary) >= cohesion:
            count += 1
    return count


# -- power law -----------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    xmin: int
    ks: float
    n_tail: int


class InsufficientDataError(ValueError):
    pass


def power_law_loglik(alpha: float, tail: np.ndarray, xmin: int) -> float:
    return float(-alpha * np.log(tail).sum() - tail.size * math.log(zeta(alpha, xmin)))


def power_law_cdf(x: np.ndarray, alpha: float, xmin: int) -> np.ndarray:
    """P(X <= x) for the discrete power law on x >= xmin."""
    return 1.0 - zeta(alpha, np.asarray(x, dtype=np.float64) + 1.0) / zeta(alpha, xmin)


def fit_power_law(degrees: Iterable[float], xmin: int = 2, method: str = "exact",
                  min_tail: int = 10) -> PowerLawFit:
    """Discrete power-law MLE on degrees >= xmin with a KS goodness-of-fit distance.

    ``method="exact"`` maximizes the Hurwitz-zeta likelihood; ``"approx"`` is the
    closed form 1 + n / sum(ln(d / (xmin - 0.5))).
    """
    d = np.asarray([x for x in degrees], dtype=np.float64)
    tail = np.sort(d[d >= xmin])
    n = tail.size
    if n < min_tail:
        raise InsufficientDataError(f"only {n} degrees >= {xmin}; need {min_tail}")
    approx = 1.0 + n / np.log(tail / (xmin - 0.5)).sum()
    if method == "approx":
        alpha = float(approx)
    elif method == "exact":
        res = minimize_scalar(lambda a: -power_law_loglik(a, tail, xmin), bounds=(1.0 + 1e-6, 20.0),
                              method="bounded", options={"xatol": 1e-9})
        alpha = float(res.x)
    else:
        raise ValueError(f"unknown method {method!r}")
    uniq, counts = np.unique(tail, return_counts=True)
    emp = np.cumsum(counts) / n
    ks = float(np.abs(emp - power_law_cdf(uniq, alpha, xmin)).max())
    left = uniq - 1
    keep = left >= xmin
    if keep.any():
        emp_left = np.concatenate([[0.0], emp[:-1]])[keep]
        ks = max(ks, float(np.abs(emp_left - power_law_cdf(left[keep], alpha, xmin)).max()))
    return PowerLawFit(alpha, xmin, ks, n)


# -- degree forecast divergences -------------------------------------------------

def hist_divergences(p, q, centers=None, bandwidth: float | str = "median",
                     eps: float = 1e-10) -> tuple[float, float, float]:
    """(Wasserstein, KL, MMD.OD) between the true histogram ``p`` and predicted ``q`` on shared bins.

    W is the mean absolute CDF gap; KL is sum p ln((p + eps) / (q + eps));
    MMD.OD is sqrt of the weighted MMD over bin ``centers`` (default 0..B-1).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.size == 0 or p.shape != q.shape:
        raise ValueError("histograms must be non-empty with shared bins")
    if p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("empty histogram")
    p, q = p / p.sum(), q / q.sum()
    w = float(np.abs(np.cumsum(p) - np.cumsum(q)).sum() / p.size)
    kl = float((p * np.log((p + eps) / (q + eps))).sum())
    c = np.arange(p.size, dtype=np.float64) if centers is None else np.asarray(centers, dtype=np.float64)
    pm, qm = p > 0, q > 0
    mmd = mmd2_rbf((c[pm], p[pm]), (c[qm], q[qm]), bandwidth)
    return w, kl, math.sqrt(max(mmd, 0.0))


def degree_divergences(pred: Iterable[float], true: Iterable[float]) -> tuple[float, float, float]:
    """Histogram on unit-width integer bins 0..max; bandwidth from the true degrees."""
    pred = np.rint(np.asarray(list(pred), dtype=np.float64)).clip(0)
    true = np.asarray(list(true), dtype=np.float64)
    if pred.size == 0 or true.size == 0:
        raise ValueError("empty degree sample")
    top = int(max(pred.max(), true.max())) + 1
    edges = np.arange(top + 1) - 0.5
    p, _ = np.histogram(true, bins=edges)
    q, _ = np.histogram(pred, bins=edges)
    sigma = median_pairwise_distance(true)
    return hist_divergences(p, q, np.arange(top), sigma if sigma > 0 else 1.0)


# -- report ----------------------------------------------------------------------

@dataclass
class MacroReport:
    model: str
    mmd_degree: float = math.nan
    mmd_clustering: float = math.nan
    mmd_spectral: float = math.nan
    edge_overlap: float = math.nan
    p_at_100_kol: float = math.nan
    delta_chambers: float = math.nan
    delta_alpha: float = math.nan
    wasserstein: float = math.nan
    kl: float = math.nan
    mmd_od: float = math.nan
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MacroReport":
        names = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in names})


def evaluate_macro(model: str, generated: Sequence, reference: Sequence, *,
                   pred_degrees: Sequence[float] | None = None, true_degrees: Sequence[float] | None = None,
                   min_size: int = 5, cohesion: float = 0.8, xmin: int = 2, kol_ranking: str = "pagerank",
                   exact_spectral_max: int = 2000, seed: int = 0) -> MacroReport:
    """Compare a generated edge list against the reference on nodes touched by edges."""
    rep = MacroReport(model)
    ref_g = undirected_projection(reference)
    gen_g = undirected_projection(generated)
    rep.extra.update(ref_edges=len(reference), gen_edges=len(generated))
    if ref_g.number_of_nodes() and gen_g.number_of_nodes():
        for kind, name in (("degree", "mmd_degree"), ("clustering", "mmd_clustering"),
                           ("spectral", "mmd_spectral")):
            a = graph_stats(gen_g, kind, exact_spectral_max=exact_spectral_max, seed=seed)
            b = graph_stats(ref_g, kind, exact_spectral_max=exact_spectral_max, seed=seed)
            setattr(rep, name, mmd2_rbf(a, b))
    if reference:
        rep.edge_overlap = edge_overlap(generated, reference)
        rep.p_at_100_kol = p_at_100_kol(generated, reference, ranking=kol_ranking)
    c_ref, c_gen = echo_chambers(ref_g, min_size, cohesion), echo_chambers(gen_g, min_size, cohesion)
    rep.delta_chambers = float(abs(c_ref - c_gen))
    rep.extra.update(chambers_ref=c_ref, chambers_gen=c_gen)
    try:
        a_ref = fit_power_law((d for _, d in ref_g.degree()), xmin).alpha
        a_gen = fit_power_law((d for _, d in gen_g.degree()), xmin).alpha
        rep.delta_alpha = abs(a_ref - a_gen)
        rep.extra.update(alpha_ref=a_ref, alpha_gen=a_gen)
    except InsufficientDataError as exc:
        rep.extra["power_law"] = str(exc)
    if pred_degrees is not None and true_degrees is not None:
        rep.wasserstein, rep.kl, rep.mmd_od = degree_divergences(pred_degrees, true_degrees)
    return rep
