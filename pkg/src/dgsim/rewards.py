"""Edge-generation rewards: curriculum category reward and judged text reward."""
from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import prompts
from .graph import Interaction, NodeId
from .llm import ChatClient, TransportFailure

log = logging.getLogger(__name__)

DIMENSIONS = ("GF", "CF", "PD", "DA", "IQ", "CR")


@dataclass
class CurriculumState:
    step: int = 0
    gamma: float = 0.01
    epsilon: float = 0.1

    def advance(self, n: int = 1) -> "CurriculumState":
        if n < 0:
            raise ValueError("cannot advance backwards")
        self.step += n
        return self


def curriculum_alpha(state: CurriculumState | int) -> float:
    if isinstance(state, int):
        state = CurriculumState(state)
    if state.step < 0:
        raise ValueError("step must be >= 0")
    return max(1.0 - state.gamma * state.step, state.epsilon)


@dataclass(frozen=True)
class ClassifierScore:
    categories: tuple
    probs: tuple[float, ...]

    def __getitem__(self, category) -> float:
        try:
            return self.probs[self.categories.index(category)]
        except ValueError:
            raise KeyError(f"category {category!r} not in label set") from None


class NotFittedError(RuntimeError):
    pass


class EdgeScorer:
    """Interface for the classifier guiding the category reward."""

    def score(self, u: NodeId, v: NodeId) -> ClassifierScore:
        raise NotImplementedError


class FrequencyScorer(EdgeScorer):
    """Laplace-smoothed category frequencies of past (u, v) interactions."""

    def __init__(self, smoothing: float = 1.0):
        self.smoothing = smoothing
        self._counts: dict[tuple[NodeId, NodeId], Counter] | None = None
        self.categories: tuple = ()

    def fit(self, edges: Iterable[Interaction], categories: Sequence) -> "FrequencyScorer":
        if not categories:
            raise ValueError("empty label set")
        counts: dict[tuple[NodeId, NodeId], Counter] = {}
        for e in edges:
            counts.setdefault((e.src, e.dst), Counter())[e.category] += 1
        self._counts = counts
        self.categories = tuple(categories)
        return self

    def score(self, u, v):
        if self._counts is None:
            raise NotFittedError("scorer used before fit")
        c = self._counts.get((u, v), Counter())
        raw = [c.get(k, 0) + self.smoothing for k in self.categories]
        total = sum(raw)
        return ClassifierScore(self.categories, tuple(x / total for x in raw))


def classifier_score(scorer: EdgeScorer, u: NodeId, v: NodeId) -> ClassifierScore:
    return scorer.score(u, v)


def reward_cat(pred, truth, score: ClassifierScore, state: CurriculumState | int, format_ok: bool) -> float:
    """alpha * score[truth] + (1 - alpha) * 1[pred == truth] + 1[format_ok]."""
    alpha = curriculum_alpha(state)
    return alpha * score[truth] + (1.0 - alpha) * float(pred == truth) + float(format_ok)


@dataclass(frozen=True)
class JudgeScores:
    GF: float = 0.0
    CF: float = 0.0
    PD: float = 0.0
    DA: float = 0.0
    IQ: float = 0.0
    CR: float = 0.0
    flags: tuple[str, ...] = field(default=(), compare=False)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, d) for d in DIMENSIONS)

    def as_dict(self) -> dict:
        return {d: getattr(self, d) for d in DIMENSIONS}


_SCORE = {d: re.compile(rf"\b{d}\b[^:\n]*[:：]\s*\[?\s*([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)") for d in DIMENSIONS}
_THINK = re.compile(r"<think>.*?</think>", re.S | re.I)


def parse_judge_scores(raw: str) -> JudgeScores:
    """First ``DIM: number`` per dimension; missing is 0 and out-of-range is clamped to [0, 5]."""
    text = _THINK.sub("", raw or "")
    values, flags = {}, []
    for d, pat in _SCORE.items():
        m = pat.search(text)
        if m is None:
            values[d] = 0.0
            flags.append(f"missing:{d}")
            continue
        v = float(m.group(1))
        if not 0.0 <= v <= 5.0:
            flags.append(f"clamped:{d}")
            v = min(max(v, 0.0), 5.0)
        values[d] = v
    return JudgeScores(**values, flags=tuple(flags))


def serialize_judge_scores(scores: JudgeScores) -> str:
    return "\n".join(f"{d}: {getattr(scores, d)!r}" for d in DIMENSIONS)


def reward_text(scores: JudgeScores, format_ok: bool) -> float:
    return sum(v / 5.0 for v in scores.values()) / len(DIMENSIONS) + float(format_ok)


@dataclass(frozen=True)
class JudgeItem:
    prompt: str
    response: str
    reference: str
    goal: str = ""


class Judge:
    """Scores generated messages with a chat model and the six-dimension rubric."""

    def __init__(self, client: ChatClient, *, workers: int = 4, prompt_dir: str | None = None):
        self.client = client
        self.workers = workers
        self.prompt_dir = prompt_dir

    def render(self, item: JudgeItem) -> str:
        return prompts.render("judge", self.prompt_dir, goal=item.goal, prompt=item.prompt,
                              response=item.response, reference=item.reference)

    def score(self, item: JudgeItem) -> JudgeScores:
        try:
            raw = self.client.ask(self.render(item))
        except TransportFailure as exc:
            log.warning("judge transport failure: %s", exc)
            return JudgeScores(flags=("transport",))
        return parse_judge_scores(raw)

    def score_many(self, items: Sequence[JudgeItem]) -> list[JudgeScores]:
        if self.workers <= 1 or len(items) <= 1:
            return [self.score(it) for it in items]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(self.score, items))


def judge(items: Sequence[JudgeItem], client: ChatClient, **kwargs) -> list[JudgeScores]:
    return Judge(client, **kwargs).score_many(items)


def interleave_domains(cat_items: Sequence, msg_items: Sequence, ratio: tuple[int, int] = (4, 1)) -> list[tuple[str, object]]:
    """Round-robin ``ratio[0]`` category items then ``ratio[1]`` message items; leftovers appended."""
    a, b = ratio
    if a < 1 or b < 1 or int(a) != a or int(b) != b:
        raise ValueError("ratio must be positive integers")
    out: list[tuple[str, object]] = []
    i = j = 0
    while i < len(cat_items) or j < len(msg_items):
        for item in cat_items[i:i + a]:
            out.append(("cat", item))
        i += a
        for item in msg_items[j:j + b]:
            out.append(("msg", item))
        j += b
    return out


@dataclass(frozen=True)
class RewardRecord:
    key: str
    r_cat: float
    r_text: float
    components: dict

    def to_json(self) -> str:
        return json.dumps({"key": self.key, "r_cat": self.r_cat, "r_text": self.r_text,
                           "components": self.components}, sort_keys=True)


def score_batch(rows: Sequence[dict], scorer: EdgeScorer, state: CurriculumState,
                judge_: Judge | None = None) -> list[RewardRecord]:
    """Rewards for rows with ``src, dst, pred_category, true_category, format_ok``.

    Rows may carry ``judge_raw`` (a judge response to parse), ``judge_scores`` (a dict)
    or, with ``judge_`` given, ``message``/``reference``/``prompt`` to score remotely.
    Rows without any judge input get ``r_text = null``.
    """
    scores: list[JudgeScores | None] = [None] * len(rows)
    remote = []
    for i, r in enumerate(rows):
        if "judge_raw" in r:
            scores[i] = parse_judge_scores(r["judge_raw"])
        elif "judge_scores" in r:
            scores[i] = parse_judge_scores(serialize_judge_scores(JudgeScores(
                **{d: float(r["judge_scores"].get(d, 0.0)) for d in DIMENSIONS})))
        elif judge_ is not None and "message" in r:
            remote.append(i)
    if remote:
        items = [JudgeItem(rows[i].get("prompt", ""), rows[i]["message"], rows[i].get("reference", ""),
                           rows[i].get("goal", "")) for i in remote]
        for i, s in zip(remote, judge_.score_many(items)):
            scores[i] = s

    out = []
    alpha = curriculum_alpha(state)
    for r, s in zip(rows, scores):
        fmt = bool(r.get("format_ok", True))
        cls = scorer.score(r["src"], r["dst"])
        rc = reward_cat(r["pred_category"], r["true_category"], cls, state, fmt)
        rt = reward_text(s, bool(r.get("text_format_ok", fmt))) if s is not None else None
        comp = {"alpha": alpha, "classifier": cls[r["true_category"]],
                "match": r["pred_category"] == r["true_category"], "format_ok": fmt}
        if s is not None:
            comp["judge"] = s.as_dict()
            if s.flags:
                comp["judge_flags"] = list(s.flags)
        key = r.get("key") or f"{r['src']}->{r['dst']}@{r.get('t', '')}"
        out.append(RewardRecord(str(key), rc, rt if rt is None or math.isfinite(rt) else None, comp))
    return out
