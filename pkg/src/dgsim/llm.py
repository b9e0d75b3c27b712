"""Chat-completion client with bounded concurrency, retries and an audit log."""
from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path

import httpx

from ._http import BoundedClient, RetryPolicy, TransportFailure

__all__ = ["ChatClient", "TransportFailure"]


class ChatClient:
    """OpenAI-style ``/chat/completions`` client.

    Endpoint and key come from ``DGSIM_LLM_BASE_URL`` / ``DGSIM_LLM_API_KEY`` unless
    given explicitly. Every request/response pair is appended to ``audit_path``.
    """

    def __init__(self, base_url: str | None = None, api_key: str | None = None, *,
                 model: str | None = None, temperature: float = 0.0, max_tokens: int | None = None,
                 path: str = "/chat/completions", timeout: float = 120.0, max_in_flight: int = 4,
                 retry: RetryPolicy | None = None, audit_path: str | Path | None = None,
                 transport: httpx.BaseTransport | None = None, sleep=None, seed: int | None = None,
                 env_prefix: str = "DGSIM_LLM"):
        base_url = base_url or os.environ.get(f"{env_prefix}_BASE_URL")
        if not base_url:
            raise TransportFailure(f"no chat endpoint configured ({env_prefix}_BASE_URL)")
        api_key = api_key if api_key is not None else os.environ.get(f"{env_prefix}_API_KEY")
        kwargs = {"sleep": sleep} if sleep is not None else {}
        self._http = BoundedClient(base_url, api_key, timeout=timeout, max_in_flight=max_in_flight,
                                   retry=retry, transport=transport, seed=seed or 0, **kwargs)
        self.model = model or os.environ.get(f"{env_prefix}_MODEL", "default")
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.path = path
        self.seed = seed
        self._audit_path = Path(audit_path) if audit_path else None
        self._audit_lock = threading.Lock()

    def complete(self, messages: list[dict], **overrides) -> str:
        payload = {"model": self.model, "messages": messages, "temperature": self.temperature}
        if self.max_tokens is not None:
            payload["max_tokens"] = self.max_tokens
        if self.seed is not None:
            payload["seed"] = self.seed
        payload.update(overrides)
        started = time.time()
        try:
            body = self._http.post_json(self.path, payload)
            content = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            self._audit(payload, None, f"malformed response: {exc}", started)
            raise TransportFailure(f"malformed chat response: {exc}") from exc
        except TransportFailure as exc:
            self._audit(payload, None, str(exc), started)
            raise
        self._audit(payload, content, None, started)
        return content

    def ask(self, prompt: str, system: str | None = None) -> str:
        messages = [{"role": "system", "content": system}] if system else []
        messages.append({"role": "user", "content": prompt})
        return self.complete(messages)

    def _audit(self, request: dict, response: str | None, error: str | None, started: float) -> None:
        if self._audit_path is None:
            return
        rec = {"ts": started, "elapsed": round(time.time() - started, 4), "request": request,
               "response": response, "error": error}
        with self._audit_lock:
            with open(self._audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
                fh.flush()

    def close(self) -> None:
        self._http.close()
