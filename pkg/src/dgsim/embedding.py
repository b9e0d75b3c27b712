"""Text embedding providers and cosine ranking."""
from __future__ import annotations

import hashlib
import os
import threading
from collections import OrderedDict
from typing import Sequence

import httpx
import numpy as np

from . import kernels
from ._http import BoundedClient, RetryPolicy
from .graph import NodeId, node_key


class EmbeddingError(RuntimeError):
    pass


class EmbeddingProvider:
    """Maps text to a unit-norm vector; the empty string maps to the zero vector."""

    name = "base"
    dimension: int

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension))
        for i, t in enumerate(texts):
            out[i] = self.embed(t)
        return out


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return np.zeros_like(vec)
    return vec / norm


class HashedTrigramEmbedder(EmbeddingProvider):
    """Signed feature hashing of character trigrams (texts under 3 chars are one gram)."""

    name = "trigram"

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if text is None:
            raise EmbeddingError("text must not be None")
        return _unit(kernels.trigram_features(text, self.dimension))


class RemoteEmbedder(EmbeddingProvider):
    """Client for an HTTP embedding endpoint with a content-hash LRU cache.

    Request body is ``{model_field: model, input_field: [texts]}``; vectors are read
    from ``output_path`` (dotted, ``*`` iterates a list), e.g. ``data.*.embedding``.
    """

    name = "remote"

    def __init__(self, base_url: str | None = None, api_key: str | None = None, *,
                 dimension: int, model: str | None = None, path: str = "/embeddings",
                 input_field: str = "input", model_field: str = "model",
                 output_path: str = "data.*.embedding", cache_size: int = 50_000,
                 batch_size: int = 64, timeout: float = 30.0, max_in_flight: int = 4,
                 retry: RetryPolicy | None = None, transport: httpx.BaseTransport | None = None,
                 sleep=None):
        base_url = base_url or os.environ.get("DGSIM_EMBED_BASE_URL")
        if not base_url:
            raise EmbeddingError("no embedding endpoint configured (DGSIM_EMBED_BASE_URL)")
        api_key = api_key if api_key is not None else os.environ.get("DGSIM_EMBED_API_KEY")
        kwargs = {"sleep": sleep} if sleep is not None else {}
        self._http = BoundedClient(base_url, api_key, timeout=timeout, max_in_flight=max_in_flight,
                                   retry=retry, transport=transport, **kwargs)
        self.dimension = dimension
        self.model = model or os.environ.get("DGSIM_EMBED_MODEL")
        self.path = path
        self.input_field = input_field
        self.model_field = model_field
        self.output_path = output_path
        self.batch_size = batch_size
        self._cache: OrderedDict[str, np.ndarray] = OrderedDict()
        self._cache_size = cache_size
        self._lock = threading.Lock()

    @staticmethod
    def _key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def _extract(self, body) -> list:
        items = [body]
        for part in self.output_path.split("."):
            nxt = []
            for it in items:
                if part == "*":
                    nxt.extend(it)
                elif isinstance(it, list):
                    nxt.append(it[int(part)])
                else:
                    nxt.append(it[part])
            items = nxt
        return items

    def _fetch(self, texts: list[str]) -> list[np.ndarray]:
        payload = {self.input_field: texts}
        if self.model:
            payload[self.model_field] = self.model
        body = self._http.post_json(self.path, payload)
        try:
            vectors = self._extract(body)
        except (KeyError, IndexError, TypeError) as exc:
            raise EmbeddingError(f"unexpected embedding response shape: {exc}") from exc
        if len(vectors) != len(texts):
            raise EmbeddingError(f"expected {len(texts)} vectors, got {len(vectors)}")
        out = []
        for v in vectors:
            arr = np.asarray(v, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise EmbeddingError(f"dimension mismatch: got {arr.shape}, want ({self.dimension},)")
            if not np.all(np.isfinite(arr)):
                raise EmbeddingError("non-finite embedding values")
            out.append(_unit(arr))
        return out

    def _remember(self, key: str, vec: np.ndarray) -> None:
        with self._lock:
            self._cache[key] = vec
            self._cache.move_to_end(key)
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension))
        pending: dict[str, list[int]] = {}
        for i, t in enumerate(texts):
            if t is None:
                raise EmbeddingError("text must not be None")
            if t == "":
                continue
            key = self._key(t)
            with self._lock:
                hit = self._cache.get(key)
                if hit is not None:
                    self._cache.move_to_end(key)
            if hit is not None:
                out[i] = hit
            else:
                pending.setdefault(t, []).append(i)
        uniq = list(pending)
        for start in range(0, len(uniq), self.batch_size):
            chunk = uniq[start:start + self.batch_size]
            for text, vec in zip(chunk, self._fetch(chunk)):
                self._remember(self._key(text), vec)
                out[pending[text]] = vec
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def close(self) -> None:
        self._http.close()


def embed(provider: EmbeddingProvider, text: str) -> np.ndarray:
    return provider.embed(text)


def cosine_scores(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != query.shape[0]:
        raise EmbeddingError(f"dimension mismatch: query {query.shape}, candidates {matrix.shape}")
    qn = np.linalg.norm(query)
    norms = np.linalg.norm(matrix, axis=1)
    denom = norms * qn
    dots = matrix @ query
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def cosine_rank(query: np.ndarray, candidates: Sequence[tuple[NodeId, np.ndarray]]) -> list[NodeId]:
    """Candidate ids by descending cosine; ties by ascending id."""
    if not candidates:
        return []
    ids = [c[0] for c in candidates]
    dim = np.shape(query)
    if any(np.shape(c[1]) != dim for c in candidates):
        raise EmbeddingError("dimension mismatch among candidate vectors")
    scores = cosine_scores(query, np.vstack([c[1] for c in candidates]))
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], node_key(ids[i])))
    return [ids[i] for i in order]
