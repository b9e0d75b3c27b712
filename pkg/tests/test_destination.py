import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgsim.destination import (BehaviorStats, CandidateList, ProfileIndex, StatsIndex, behavior_stats,
                               retrieve_candidates, reward_dst, truncate_to_k2)
from dgsim.embedding import HashedTrigramEmbedder
from dgsim.graph import Interaction, NodeProfile, TemporalGraph, UnknownNodeError
from dgsim.policy import FilterRule, QueryPlan, parse_filter


def test_stats_from_fixture(five_nodes):
    # before day 3 node 0 has edges to {1, 1, 2}
    s = behavior_stats(five_nodes, 0, 1, 3)
    assert (s.SF, s.HI) == (3.0, 2.0)
    # out-neighbors 1 and 2 have 2 and 1 prior out-edges
    assert s.AFN == 1.5
    # N(0) = {1, 2}, N(1) = {2, 3}
    assert s.CN == 1.0
    assert behavior_stats(five_nodes, 0, 1, 0) == BehaviorStats()


def test_cn_symmetric(five_nodes):
    idx = StatsIndex(five_nodes, 5)
    for u, v in itertools.permutations(five_nodes.node_ids(), 2):
        assert idx.stats(u, v).CN == idx.stats(v, u).CN


def test_stats_unknown_node(five_nodes):
    with pytest.raises(UnknownNodeError):
        behavior_stats(five_nodes, 0, 99, 3)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.integers(0, 6)), max_size=40),
       st.integers(0, 7))
def test_stats_index_matches_direct_count(raw, cut):
    g = TemporalGraph([NodeProfile(i) for i in range(6)], [Interaction(u, v, t, "", 0) for u, v, t in raw])
    idx = StatsIndex(g, cut)
    past = [(u, v) for u, v, t in raw if t < cut]
    for u, v in itertools.product(range(6), repeat=2):
        s = idx.stats(u, v)
        nu = {b for a, b in past if a == u}
        nv = {b for a, b in past if a == v}
        assert s.SF == sum(1 for a, _ in past if a == u)
        assert s.HI == sum(1 for e in past if e == (u, v)) <= s.SF
        assert s.CN == len(nu & nv)
        if nu:
            assert s.AFN == pytest.approx(sum(sum(1 for a, _ in past if a == w) for w in nu) / len(nu))


def test_query_equal_to_profile_ranks_that_node_first(five_nodes):
    # node 4 has no out-edges, so every candidate comes from the general stage
    plan = QueryPlan(five_nodes.profile(2), FilterRule(()))
    c = retrieve_candidates(plan, five_nodes, 4, 5, k1=10)
    assert c.ids[0] == 2
    assert 4 not in c.ids and set(c.provenance) == {"general"}


def test_neighbors_precede_general(five_nodes):
    plan = QueryPlan(five_nodes.profile(4), FilterRule(()))
    c = retrieve_candidates(plan, five_nodes, 0, 3, k1=10)
    # node 0's past out-neighbors before day 3 are {1, 2}
    assert set(c.ids[:2]) == {1, 2}
    assert c.provenance == ("neighbor", "neighbor", "general", "general")
    assert c.ids[2] == 4


def test_no_neighbors_and_unsatisfiable_filter_is_empty(five_nodes):
    plan = QueryPlan("anything", parse_filter("HI >= 1"))
    assert retrieve_candidates(plan, five_nodes, 4, 5, k1=10).ids == ()


def test_k1_truncation_and_pins(five_nodes):
    plan = QueryPlan("x", FilterRule(()), pinned=(3, 0, 3))
    c = retrieve_candidates(plan, five_nodes, 0, 3, k1=2)
    assert c.ids == (3, 1) or c.ids == (3, 2)
    assert c.provenance[0] == "replay"
    with pytest.raises(ValueError):
        retrieve_candidates(plan, five_nodes, 0, 3, k1=0)


def test_all_neighbor_when_enough():
    nodes = [NodeProfile(i, f"profile {i}") for i in range(8)]
    edges = [Interaction(0, v, 0, "", 0) for v in range(1, 6)]
    g = TemporalGraph(nodes, edges)
    c = retrieve_candidates(QueryPlan("profile 7", FilterRule(())), g, 0, 1, k1=5)
    assert set(c.provenance) == {"neighbor"} and len(c) == 5


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(0, 4)), max_size=30),
       st.integers(0, 7), st.integers(1, 10), st.sampled_from(["", "HI >= 1", "CN >= 1 or SF > 2", "AFN < 1"]))
def test_retrieval_invariants(raw, u, k1, rule):
    g = TemporalGraph([NodeProfile(i, f"user {i} likes topic {i % 3}") for i in range(8)],
                      [Interaction(a, b, t, "", 0) for a, b, t in raw])
    c = retrieve_candidates(QueryPlan("topic 1", parse_filter(rule)), g, u, 5, k1=k1)
    assert len(set(c.ids)) == len(c.ids) <= k1
    assert u not in c.ids
    tags = list(c.provenance)
    assert tags == sorted(tags, key=["replay", "neighbor", "general"].index)
    nbrs = {b for a, b, t in raw if a == u and t < 5 and b != u}
    picked = {i for i, tag in zip(c.ids, tags) if tag == "neighbor"}
    assert picked <= nbrs
    if len(nbrs) <= k1:
        assert picked == nbrs


def test_shared_index_gives_same_result(five_nodes):
    plan = QueryPlan("jazz", FilterRule(()))
    idx = ProfileIndex(five_nodes, HashedTrigramEmbedder())
    assert retrieve_candidates(plan, five_nodes, 0, 3, index=idx, stats=StatsIndex(five_nodes, 3)) == \
        retrieve_candidates(plan, five_nodes, 0, 3)


def test_truncate_to_k2():
    cands = CandidateList((5, 6, 7), ("neighbor",) * 3)
    assert truncate_to_k2(cands, 0) == []
    assert truncate_to_k2(cands, 2.5) == [5, 6]
    assert truncate_to_k2(cands, 9.0) == [5, 6, 7]
    with pytest.raises(ValueError):
        truncate_to_k2(cands, -1)


def test_reward_dst():
    assert reward_dst([[1, 2]], [[3]], True) == 1.0
    assert reward_dst([[1, 2, 3, 9]], [[1, 2, 3]], False) == 3.0
    assert reward_dst([[1, 2], [3, 4, 5]], [[1, 2], [3, 4, 5]], True) == 6.0
    with pytest.raises(ValueError):
        reward_dst([[1]], [], True)


@given(st.sets(st.integers(0, 20)), st.sets(st.integers(0, 20), min_size=1), st.integers(0, 20))
def test_reward_dst_monotone(found, truth, extra):
    assert reward_dst([sorted(found | {extra})], [truth], True) >= reward_dst([sorted(found)], [truth], True)
