"""Transductive evaluation: destination recall/hit and edge text/category quality."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .. import kernels
from ..embedding import EmbeddingProvider, HashedTrigramEmbedder
from ..graph import NodeId


@dataclass(frozen=True)
class SelectionSample:
    u: NodeId
    t: int
    truth: frozenset
    predicted: tuple

    @classmethod
    def make(cls, u, t, truth: Iterable, predicted: Iterable) -> "SelectionSample":
        return cls(u, t, frozenset(truth), tuple(predicted))


def _check(sample: SelectionSample) -> None:
    if not sample.truth:
        raise ValueError(f"empty truth for source {sample.u!r} day {sample.t}")


def recall_at_k(sample: SelectionSample, k: int = 100) -> float:
    _check(sample)
    return len(sample.truth & set(sample.predicted[:k])) / len(sample.truth)


def hit_at_k(sample: SelectionSample, k: int = 100) -> int:
    _check(sample)
    return int(bool(sample.truth & set(sample.predicted[:k])))


def nearest_rank(values: Sequence[float], pct: int) -> float:
    ordered = sorted(values)
    idx = max(1, (pct * len(ordered) + 99) // 100)
    return ordered[idx - 1]


def split_easy_hard(samples: Sequence[SelectionSample], pct: int = 70) -> list[str]:
    """Label each sample "easy" when its truth size exceeds the nearest-rank percentile."""
    if not samples:
        return []
    cut = nearest_rank([len(s.truth) for s in samples], pct)
    return ["easy" if len(s.truth) > cut else "hard" for s in samples]


def category_accuracy(pairs: Sequence[tuple]) -> float:
    if not pairs:
        raise ValueError("no category pairs")
    return sum(1 for p, t in pairs if p == t) / len(pairs)


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def rouge_l(pairs: Sequence[tuple[str, str]]) -> float:
    """Corpus-level sum of LCS lengths over the sum of reference lengths."""
    vocab: dict[str, int] = {}

    def ids(tokens):
        return [vocab.setdefault(tok, len(vocab)) for tok in tokens]

    num = den = 0
    for gen, ref in pairs:
        r = tokenize(ref)
        den += len(r)
        if r:
            num += kernels.lcs_length(ids(tokenize(gen)), ids(r))
    if den == 0:
        raise ValueError("empty reference corpus")
    return num / den


def _greedy_f1(g: np.ndarray, r: np.ndarray) -> float:
    sim = g @ r.T
    p = max(float(sim.max(axis=1).mean()), 0.0)
    rc = max(float(sim.max(axis=0).mean()), 0.0)
    return 0.0 if p + rc == 0 else 2 * p * rc / (p + rc)


def token_f1(pairs: Sequence[tuple[str, str]], provider: EmbeddingProvider | None = None) -> float:
    """Mean per-pair F1 of greedy max-cosine token matching."""
    if not pairs:
        raise ValueError("no text pairs")
    provider = provider or HashedTrigramEmbedder()
    cache: dict[str, np.ndarray] = {}
    toks = [(tokenize(g), tokenize(r)) for g, r in pairs]
    missing = sorted({t for g, r in toks for t in g + r})
    if missing:
        for tok, vec in zip(missing, provider.embed_many(missing)):
            cache[tok] = vec
    total = 0.0
    for g, r in toks:
        if not g and not r:
            total += 1.0
        elif g and r:
            total += _greedy_f1(np.vstack([cache[t] for t in g]), np.vstack([cache[t] for t in r]))
    return total / len(pairs)


@dataclass
class MicroReport:
    model: str
    recall_easy: float = math.nan
    recall_hard: float = math.nan
    recall_all: float = math.nan
    hit_easy: float = math.nan
    hit_hard: float = math.nan
    hit_all: float = math.nan
    acc: float = math.nan
    rouge_l: float = math.nan
    token_f1: float = math.nan
    n_samples: int = 0
    n_edges: int = 0
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MicroReport":
        names = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in data.items() if k in names})


def _mean(xs: list[float]) -> float:
    return float(np.mean(xs)) if xs else math.nan


def evaluate_micro(model: str, samples: Sequence[SelectionSample], categories: Sequence[tuple],
                   texts: Sequence[tuple[str, str]], provider: EmbeddingProvider | None = None,
                   k: int = 100) -> MicroReport:
    samples = [s for s in samples if s.truth]
    labels = split_easy_hard(samples)
    rec = [recall_at_k(s, k) for s in samples]
    hit = [hit_at_k(s, k) for s in samples]
    rep = MicroReport(model, n_samples=len(samples), n_edges=len(categories))
    for name, vals in (("recall", rec), ("hit", hit)):
        setattr(rep, f"{name}_easy", _mean([v for v, l in zip(vals, labels) if l == "easy"]))
        setattr(rep, f"{name}_hard", _mean([v for v, l in zip(vals, labels) if l == "hard"]))
        setattr(rep, f"{name}_all", _mean(vals))
    if categories:
        rep.acc = category_accuracy(categories)
    if texts and any(tokenize(r) for _, r in texts):
        rep.rouge_l = rouge_l(texts)
        rep.token_f1 = token_f1(texts, provider)
    return rep
