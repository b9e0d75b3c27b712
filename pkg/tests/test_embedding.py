import json
import threading

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgsim.embedding import (EmbeddingError, HashedTrigramEmbedder, RemoteEmbedder, cosine_rank,
                             cosine_scores)
from dgsim._http import RetryPolicy, TransportFailure


@given(st.text(min_size=1, max_size=40))
def test_trigram_vectors_are_unit_or_zero(text):
    v = HashedTrigramEmbedder().embed(text)
    assert v.shape == (256,)
    norm = np.linalg.norm(v)
    assert norm == pytest.approx(1.0) or norm == 0.0


def test_empty_text_is_zero_vector():
    assert not HashedTrigramEmbedder().embed("").any()


def test_identical_text_has_cosine_one():
    e = HashedTrigramEmbedder()
    a = e.embed("night sky photography")
    assert float(a @ e.embed("night sky photography")) == pytest.approx(1.0)


def test_cosine_rank_ties_by_id():
    q = np.array([1.0, 0.0])
    cands = [("b", np.array([1.0, 0.0])), (2, np.array([0.0, 1.0])), ("a", np.array([2.0, 0.0]))]
    assert cosine_rank(q, cands) == ["a", "b", 2]


def test_cosine_zero_norm_scores_zero():
    assert cosine_scores(np.array([1.0, 0.0]), np.zeros((1, 2)))[0] == 0.0


def test_cosine_dimension_mismatch():
    with pytest.raises(EmbeddingError):
        cosine_rank(np.ones(3), [(0, np.ones(2))])


def _server(dim=4, fail_first=0, calls=None):
    state = {"n": 0}
    lock = threading.Lock()

    def handler(request: httpx.Request):
        with lock:
            state["n"] += 1
            n = state["n"]
        if calls is not None:
            calls.append(json.loads(request.content))
        if n <= fail_first:
            return httpx.Response(503)
        texts = json.loads(request.content)["input"]
        data = [{"embedding": [float(len(t)), 1.0] + [0.0] * (dim - 2)} for t in texts]
        return httpx.Response(200, json={"data": data})

    return httpx.MockTransport(handler), state


def test_remote_embedder_batches_and_caches():
    calls = []
    transport, state = _server(calls=calls)
    emb = RemoteEmbedder("http://embed", "k", dimension=4, model="m", transport=transport, batch_size=2)
    out = emb.embed_many(["aa", "b", "aa", "ccc", ""])
    assert state["n"] == 2
    assert [c["input"] for c in calls] == [["aa", "b"], ["ccc"]]
    assert calls[0]["model"] == "m"
    np.testing.assert_allclose(np.linalg.norm(out[:4], axis=1), 1.0)
    assert not out[4].any()
    emb.embed("aa")
    assert state["n"] == 2


def test_remote_embedder_retries_transient_errors():
    transport, state = _server(fail_first=2)
    emb = RemoteEmbedder("http://embed", dimension=4, transport=transport, sleep=lambda s: None,
                         retry=RetryPolicy(max_retries=3))
    emb.embed("hello")
    assert state["n"] == 3


def test_remote_embedder_gives_up():
    transport, _ = _server(fail_first=10)
    emb = RemoteEmbedder("http://embed", dimension=4, transport=transport, sleep=lambda s: None,
                         retry=RetryPolicy(max_retries=1))
    with pytest.raises(TransportFailure):
        emb.embed("hello")


def test_remote_dimension_mismatch():
    transport, _ = _server(dim=4)
    emb = RemoteEmbedder("http://embed", dimension=8, transport=transport)
    with pytest.raises(EmbeddingError, match="dimension"):
        emb.embed("x")


def test_remote_requires_endpoint(monkeypatch):
    monkeypatch.delenv("DGSIM_EMBED_BASE_URL", raising=False)
    with pytest.raises(EmbeddingError):
        RemoteEmbedder(dimension=4)


def test_cache_eviction():
    transport, state = _server()
    emb = RemoteEmbedder("http://embed", dimension=4, transport=transport, cache_size=1)
    emb.embed("a")
    emb.embed("b")
    emb.embed("a")
    assert state["n"] == 3
