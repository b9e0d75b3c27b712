"""Shared HTTP plumbing: bounded in-flight requests, timeout, backoff with jitter."""
from __future__ import annotations

import logging
import random
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable

import httpx

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class TransportFailure(RuntimeError):
    """The remote endpoint could not be reached successfully within the retry budget."""


@dataclass
class RetryPolicy:
    max_retries: int = 3
    base_delay: float = 0.5
    max_delay: float = 8.0
    jitter: float = 0.25

    def delay(self, attempt: int, rng: random.Random) -> float:
        d = min(self.max_delay, self.base_delay * (2 ** attempt))
        return d * (1.0 + rng.uniform(-self.jitter, self.jitter))


class BoundedClient:
    """httpx.Client wrapper limiting concurrent requests and retrying transient errors."""

    def __init__(self, base_url: str, api_key: str | None = None, *, timeout: float = 60.0,
                 max_in_flight: int = 4, retry: RetryPolicy | None = None,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep, seed: int = 0):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(base_url=base_url, headers=headers, timeout=timeout,
                                    transport=transport)
        self._sem = threading.BoundedSemaphore(max(1, max_in_flight))
        self.retry = retry or RetryPolicy()
        self._sleep = sleep
        self._rng = random.Random(seed)
        self._rng_lock = threading.Lock()

    def post_json(self, path: str, payload: dict) -> Any:
        last: Exception | None = None
        for attempt in range(self.retry.max_retries + 1):
            try:
                with self._sem:
                    resp = self._client.post(path, json=payload)
                if resp.status_code in RETRYABLE_STATUS:
                    last = TransportFailure(f"HTTP {resp.status_code}")
                else:
                    resp.raise_for_status()
                    return resp.json()
            except httpx.TransportError as exc:
                last = exc
            except httpx.HTTPStatusError as exc:
                raise TransportFailure(f"HTTP {exc.response.status_code}: {exc.response.text[:200]}") from exc
            if attempt < self.retry.max_retries:
                with self._rng_lock:
                    wait = self.retry.delay(attempt, self._rng)
                log.debug("retrying %s after %s (attempt %d)", path, last, attempt + 1)
                self._sleep(wait)
        raise TransportFailure(f"{path}: failed after {self.retry.max_retries + 1} attempts: {last}")

    def close(self) -> None:
        self._client.close()
