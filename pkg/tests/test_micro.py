import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgsim.embedding import HashedTrigramEmbedder
from dgsim.metrics.micro import (MicroReport, SelectionSample, category_accuracy, evaluate_micro, hit_at_k,
                                 nearest_rank, recall_at_k, rouge_l, split_easy_hard, token_f1)
from oracles import fnv1a_trigram, lcs


def S(truth, pred, u=0, t=0):
    return SelectionSample.make(u, t, truth, pred)


def test_recall_and_hit():
    assert recall_at_k(S({"a", "b"}, ["a", "x"])) == 0.5
    assert recall_at_k(S({"a"}, ["x", "a"]), k=1) == 0.0
    assert hit_at_k(S({"a", "b"}, ["b"])) == 1
    assert hit_at_k(S({"a"}, ["z"])) == 0
    with pytest.raises(ValueError):
        recall_at_k(S(set(), ["a"]))


@given(st.sets(st.integers(0, 30), min_size=1), st.lists(st.integers(0, 30), unique=True), st.integers(1, 30))
def test_recall_properties(truth, pred, k):
    s = S(truth, pred)
    r = recall_at_k(s, k)
    assert 0.0 <= r <= recall_at_k(s, k + 1) <= 1.0
    assert (r > 0) == (hit_at_k(s, k) == 1)


def test_easy_hard_nearest_rank():
    samples = [S(set(range(n)), []) for n in range(1, 11)]
    assert nearest_rank([len(s.truth) for s in samples], 70) == 7
    labels = split_easy_hard(samples)
    assert [len(s.truth) for s, l in zip(samples, labels) if l == "easy"] == [8, 9, 10]
    assert split_easy_hard([S({1, 2}, [])] * 4) == ["hard"] * 4
    assert split_easy_hard([S({1}, [])]) == ["hard"]


def test_category_accuracy():
    assert category_accuracy([(1, 1), (2, 2), (3, 0), (4, 4)]) == 0.75
    with pytest.raises(ValueError):
        category_accuracy([])


def test_rouge_l():
    assert rouge_l([("a c", "a b c")]) == pytest.approx(2 / 3)
    assert rouge_l([("Same Words", "same words")]) == 1.0
    assert rouge_l([("x y", "a b")]) == 0.0
    # micro aggregation: (2 + 1) / (3 + 1)
    assert rouge_l([("a c", "a b c"), ("q", "q")]) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        rouge_l([("a", "")])


words = st.lists(st.sampled_from(["a", "b", "c", "dd", "e"]), min_size=1, max_size=8).map(" ".join)


@given(st.lists(st.tuples(words, words), min_size=1, max_size=5))
def test_rouge_matches_lcs_oracle(pairs):
    num = sum(lcs(g.split(), r.split()) for g, r in pairs)
    den = sum(len(r.split()) for _, r in pairs)
    assert rouge_l(pairs) == pytest.approx(num / den)


def _unit(v):
    v = np.asarray(v)
    return v / np.linalg.norm(v)


def test_token_f1_two_token_hand_alignment():
    gen, ref = "sunny beach", "beach sunset"
    vec = {w: _unit(fnv1a_trigram(w, 256)) for w in ("sunny", "beach", "sunset")}
    # precision: best reference match for each generated token; recall: the converse
    p = (max(vec["sunny"] @ vec["beach"], vec["sunny"] @ vec["sunset"]) + 1.0) / 2
    r = (1.0 + max(vec["sunset"] @ vec["sunny"], vec["sunset"] @ vec["beach"])) / 2
    expected = 2 * p * r / (p + r)
    assert token_f1([(gen, ref)]) == pytest.approx(expected, abs=1e-12)


def test_token_f1_edge_cases():
    assert token_f1([("hello there", "hello there")]) == pytest.approx(1.0)
    assert token_f1([("", "something")]) == 0.0
    assert token_f1([("", "")]) == 1.0


@given(st.lists(words, min_size=1, max_size=4))
def test_identical_corpora_score_one(texts):
    pairs = [(t, t) for t in texts]
    assert rouge_l(pairs) == 1.0
    assert token_f1(pairs, HashedTrigramEmbedder(64)) == pytest.approx(1.0)


def test_evaluate_micro_groups():
    samples = [S({1}, [1]), S({1, 2, 3}, [1]), S({4}, [])]
    rep = evaluate_micro("m", samples, [(0, 0), (0, 1)], [("a b", "a b")])
    assert rep.recall_all == pytest.approx((1 + 1 / 3 + 0) / 3)
    # three samples: the 70th-percentile size is the maximum, so nothing is easy
    assert math.isnan(rep.recall_easy) and rep.recall_hard == pytest.approx(rep.recall_all)
    assert rep.acc == 0.5 and rep.rouge_l == 1.0
    empty = evaluate_micro("m", [S({1}, [1])], [], [])
    assert math.isnan(empty.recall_easy) and math.isnan(empty.acc)
    assert MicroReport.from_dict(rep.as_dict()) == rep
