"""Interaction policies: destination query generation and edge generation.

Three backends share one interface: ``LLMBackend`` (remote chat model),
``HeuristicBackend`` (deterministic rules) and ``ReplayBackend`` (ground truth).
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from . import prompts
from .graph import Interaction, NodeId, NodeMemory, NodeProfile, TemporalGraph
from .llm import ChatClient, TransportFailure

log = logging.getLogger(__name__)

METRICS = ("SF", "AFN", "HI", "CN")
COMPARATORS = (">=", "<=", ">", "<", "=")


class FilterSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Clause:
    metric: str
    op: str
    threshold: float

    def holds(self, value: float) -> bool:
        t = self.threshold
        return {">": value > t, ">=": value >= t, "=": value == t,
                "<=": value <= t, "<": value < t}[self.op]

    def __str__(self) -> str:
        thr = int(self.threshold) if float(self.threshold).is_integer() else self.threshold
        return f"{self.metric} {self.op} {thr}"


@dataclass(frozen=True)
class FilterRule:
    """Disjunction of threshold clauses over behavior stats; empty matches everything."""

    clauses: tuple[Clause, ...] = ()

    def matches(self, stats) -> bool:
        if not self.clauses:
            return True
        return any(c.holds(getattr(stats, c.metric)) for c in self.clauses)

    def __str__(self) -> str:
        return " or ".join(str(c) for c in self.clauses)

    @classmethod
    def parse(cls, text: str) -> "FilterRule":
        return parse_filter(text)


_TOKEN = re.compile(r"\s*(?:(SF|AFN|HI|CN)\b|(>=|<=|>|<|=)|([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(or)\b)")


def parse_filter(text: str) -> FilterRule:
    """Parse ``METRIC OP NUMBER ( or METRIC OP NUMBER )*``; blank or ``none`` is the empty rule."""
    text = text.strip()
    if text == "" or text.lower() == "none":
        return FilterRule(())
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise FilterSyntaxError(f"unexpected input at {pos}: {text[pos:pos + 12]!r}")
        kind = ("metric", "op", "number", "or")[m.lastindex - 1]
        tokens.append((kind, m.group(m.lastindex)))
        pos = m.end()
    clauses = []
    i = 0
    while True:
        if i + 3 > len(tokens) or [k for k, _ in tokens[i:i + 3]] != ["metric", "op", "number"]:
            raise FilterSyntaxError(f"expected 'METRIC OP NUMBER' in {text!r}")
        thr = float(tokens[i + 2][1])
        if thr != thr or thr in (float("inf"), float("-inf")):
            raise FilterSyntaxError("threshold must be finite")
        clauses.append(Clause(tokens[i][1], tokens[i + 1][1], thr))
        i += 3
        if i == len(tokens):
            break
        if tokens[i][0] != "or":
            raise FilterSyntaxError(f"expected 'or' in {text!r}")
        i += 1
    return FilterRule(tuple(clauses))


@dataclass(frozen=True)
class QueryPlan:
    query_text: str
    filter: FilterRule = field(default_factory=FilterRule)
    # destinations forced to the head of the candidate list; only the replay backend sets this
    pinned: tuple[NodeId, ...] = ()
    valid: bool = True
    flags: tuple[str, ...] = ()
    raw: str | None = None


@dataclass(frozen=True)
class EdgeDraft:
    message: str
    category: int | str
    valid: bool = True
    flags: tuple[str, ...] = ()
    raw: str | None = None


# -- response parsing ------------------------------------------------------------

_THINK = re.compile(r"<think>.*?</think>", re.S | re.I)


def _header(name: str) -> re.Pattern:
    return re.compile(rf"^[\s*#>`_-]*{name}[\s*`_]*[:：]\s*(.*)$", re.I)


_QUERY_H, _FILTER_H = _header("QUERY"), _header("FILTER")
_LABEL_H, _TEXT_H = _header("LABEL"), _header("TEXT")


def _clean(value: str) -> str:
    return value.strip().strip("*`").strip()


def _section(lines: list[str], start: int, first: str, stop_headers: Sequence[re.Pattern]) -> str:
    parts = [first]
    for line in lines[start + 1:]:
        if not line.strip() or any(h.match(line) for h in stop_headers):
            break
        parts.append(line.strip())
    return _clean(" ".join(p for p in parts if p))


def _find(lines: list[str], header: re.Pattern, begin: int = 0) -> tuple[int, str] | None:
    for i in range(begin, len(lines)):
        m = header.match(lines[i])
        if m:
            return i, m.group(1)
    return None


def parse_query_response(raw: str) -> QueryPlan | None:
    """QUERY/FILTER blocks; anything after the FILTER line is ignored."""
    lines = _THINK.sub("", raw or "").splitlines()
    q = _find(lines, _QUERY_H)
    if q is None:
        return None
    text = _section(lines, q[0], q[1], (_FILTER_H,))
    f = _find(lines, _FILTER_H, q[0] + 1)
    if not text or f is None:
        return None
    try:
        rule = parse_filter(_clean(f[1]))
    except FilterSyntaxError:
        return None
    return QueryPlan(text, rule, raw=raw)


def parse_edge_response(raw: str) -> tuple[str, str] | None:
    """Return ``(label, text)`` from LABEL/TEXT blocks, or None if either is missing."""
    lines = _THINK.sub("", raw or "").splitlines()
    lab = _find(lines, _LABEL_H)
    txt = _find(lines, _TEXT_H)
    if lab is None or txt is None:
        return None
    label = _clean(lab[1])
    if not label:
        return None
    return label, _section(lines, txt[0], txt[1], (_LABEL_H,))


def validate_format(raw: str, schema: str) -> bool:
    """The r_format bit: required sections present and parseable."""
    if schema == "query":
        return parse_query_response(raw) is not None
    if schema == "edge":
        return parse_edge_response(raw) is not None
    raise ValueError(f"unknown schema {schema!r}")


def serialize_plan(plan: QueryPlan) -> str:
    query = " ".join(plan.query_text.split())
    return f"QUERY: {query}\nFILTER: {plan.filter or 'none'}"


def serialize_edge(draft: EdgeDraft) -> str:
    return f"LABEL: {draft.category}\nTEXT: {' '.join(draft.message.split())}"


def coerce_label(raw: str, labels: Sequence) -> int | str | None:
    by_text = {str(l): l for l in labels}
    if raw in by_text:
        return by_text[raw]
    norm = raw.strip().strip("\"'[]()<>.").strip().lower()
    for text, label in by_text.items():
        if text.lower() == norm:
            return label
    return None


def fallback_plan(src: NodeProfile, flag: str = "invalid-format", raw: str | None = None) -> QueryPlan:
    text = src.profile.strip() or f"node {src.id}"
    return QueryPlan(text, FilterRule(()), valid=False, flags=(flag,), raw=raw)


def majority_category(memory: NodeMemory, labels: Sequence) -> int | str:
    """Most frequent category in ``memory``; ties and empty memory go to the lowest label."""
    if not labels:
        raise ValueError("empty label set")
    counts = Counter(e.category for e in memory.entries)
    best = labels[0]
    for label in labels:
        if counts.get(label, 0) > counts.get(best, 0):
            best = label
    return best


# -- backends ------------------------------------------------------------------

class PolicyBackend:
    name = "base"
    kind = "base"

    def propose_query(self, src: NodeProfile, memory: NodeMemory, neighbor_context: str = "",
                      n_dst: int = 1) -> QueryPlan:
        raise NotImplementedError

    def propose_edge(self, src: NodeProfile, dst: NodeProfile, pair_memory: NodeMemory,
                     labels: Sequence) -> EdgeDraft:
        raise NotImplementedError


class HeuristicBackend(PolicyBackend):
    """Rule-based policy.

    Query: the three most recent destination profiles (newest first), filter ``HI >= 1``.
    Edge: majority category of the pair memory (broadcast entries vote too), templated text.
    """

    name = kind = "heuristic"

    def __init__(self, recent: int = 3):
        self.recent = recent

    def propose_query(self, src, memory, neighbor_context="", n_dst=1):
        past = [e for e in memory.entries if e.broadcast_id is None]
        recent = [e.dst_profile for e in reversed(past[-self.recent:])]
        text = " ".join(p for p in recent if p.strip()) or src.profile.strip() or f"node {src.id}"
        return QueryPlan(text, FilterRule((Clause("HI", ">=", 1.0),)))

    def propose_edge(self, src, dst, pair_memory, labels):
        return EdgeDraft(f"{src.id} interacts with {dst.id}", majority_category(pair_memory, labels))


class ReplayBackend(PolicyBackend):
    """Replays a reference graph: the day is read from the memory cut."""

    name = kind = "replay"

    def __init__(self, reference: TemporalGraph):
        self.reference = reference
        self._by_src: dict[NodeId, list[Interaction]] = {}
        for e in reference.edges:
            self._by_src.setdefault(e.src, []).append(e)

    def true_destinations(self, u: NodeId, day: int) -> list[NodeId]:
        seen: dict[NodeId, None] = {}
        for e in self._by_src.get(u, ()):
            if e.t == day:
                seen.setdefault(e.dst)
        return list(seen)

    def propose_query(self, src, memory, neighbor_context="", n_dst=1):
        day = memory.cut
        nxt = next((e for e in self._by_src.get(src.id, ()) if e.t >= day), None)
        text = self.reference.profile(nxt.dst) if nxt is not None else ""
        text = text.strip() or src.profile.strip() or f"node {src.id}"
        return QueryPlan(text, FilterRule(()), pinned=tuple(self.true_destinations(src.id, day)))

    def propose_edge(self, src, dst, pair_memory, labels):
        day = pair_memory.cut
        for e in self._by_src.get(src.id, ()):
            if e.t == day and e.dst == dst.id:
                return EdgeDraft(e.message, e.category)
        return EdgeDraft("", majority_category(pair_memory, labels), valid=False,
                         flags=("no-reference-edge",))


def _memory_dst_lines(memory: NodeMemory, limit: int) -> str:
    entries = memory.entries[-limit:] if limit else memory.entries
    if not entries:
        return "(none)"
    return "\n".join(f"{i}. [day {e.t}] {e.dst_profile}" for i, e in enumerate(entries, 1))


def _memory_edge_lines(memory: NodeMemory, limit: int) -> str:
    entries = memory.entries[-limit:] if limit else memory.entries
    if not entries:
        return "(none)"
    return "\n".join(f"[day {e.t}] -> {e.dst} LABEL: {e.category} TEXT: {e.message}" for e in entries)


class LLMBackend(PolicyBackend):
    """Remote chat model driven by the destination / edge prompt templates."""

    name = kind = "llm"

    def __init__(self, client: ChatClient, *, parse_retries: int = 2, environment: str = "",
                 prompt_dir: str | None = None, memory_limit: int = 20):
        self.client = client
        self.parse_retries = parse_retries
        self.environment = environment
        self.prompt_dir = prompt_dir
        self.memory_limit = memory_limit

    def query_prompt(self, src, memory, neighbor_context, n_dst) -> str:
        return prompts.render(
            "destination", self.prompt_dir, src_id=src.id, n_dst=n_dst,
            environment=self.environment, src_text=src.profile,
            memory_dst_texts=_memory_dst_lines(memory, self.memory_limit),
            neighbor_dst_texts=neighbor_context or "(none)")

    def edge_prompt(self, src, dst, pair_memory, labels) -> str:
        return prompts.render(
            "edge", self.prompt_dir, src_id=src.id, dst_id=dst.id, src_text=src.profile,
            dst_text=dst.profile, memory_edge_texts=_memory_edge_lines(pair_memory, self.memory_limit),
            labels=", ".join(str(l) for l in labels))

    def _attempts(self, prompt: str):
        for _ in range(1 + self.parse_retries):
            yield self.client.ask(prompt)

    def propose_query(self, src, memory, neighbor_context="", n_dst=1):
        raw = None
        try:
            for raw in self._attempts(self.query_prompt(src, memory, neighbor_context, n_dst)):
                plan = parse_query_response(raw)
                if plan is not None:
                    return plan
        except TransportFailure as exc:
            log.warning("query transport failure for %r: %s", src.id, exc)
            return fallback_plan(src, "transport", raw)
        return fallback_plan(src, "invalid-format", raw)

    def propose_edge(self, src, dst, pair_memory, labels):
        raw = None
        fallback = majority_category(pair_memory, labels)
        try:
            for raw in self._attempts(self.edge_prompt(src, dst, pair_memory, labels)):
                parsed = parse_edge_response(raw)
                if parsed is None:
                    continue
                label_text, message = parsed
                label = coerce_label(label_text, labels)
                if label is None:
                    return EdgeDraft(message, fallback, valid=False, flags=("unknown-label",), raw=raw)
                return EdgeDraft(message, label, raw=raw)
        except TransportFailure as exc:
            log.warning("edge transport failure for %r->%r: %s", src.id, dst.id, exc)
            return EdgeDraft("", fallback, valid=False, flags=("transport",), raw=raw)
        return EdgeDraft("", fallback, valid=False, flags=("invalid-format",), raw=raw)


def make_backend(kind: str, *, reference: TemporalGraph | None = None,
                 client: ChatClient | None = None, **kwargs) -> PolicyBackend:
    if kind == "heuristic":
        return HeuristicBackend(**kwargs)
    if kind == "replay":
        if reference is None:
            raise ValueError("replay backend needs the reference graph")
        return ReplayBackend(reference)
    if kind == "llm":
        return LLMBackend(client or ChatClient(), **kwargs)
    raise ValueError(f"unknown backend {kind!r}")

