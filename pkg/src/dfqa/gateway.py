"""Chat-completion client with greedy defaults, retries, bounded concurrency,
and a content-addressed record/replay cache.

The cache is the reproducibility artifact: every completion is stored under
``cache/<sha256>.json`` keyed by the canonical serialization of the messages
and generation parameters, so a recorded evaluation replays byte-identically
offline. Endpoint configuration comes from the environment:

    DFQA_LLM_BASE_URL   e.g. https://api.example.com/v1
    DFQA_LLM_API_KEY    bearer token, optional
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence


class GatewayError(Exception):
    pass


class RateLimited(GatewayError):
    pass


class Timeout(GatewayError):
    pass


class CacheMiss(GatewayError):
    pass


class TransportError(GatewayError):
    pass


@dataclass(frozen=True)
class GenParams:
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 60.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "temperature", float(self.temperature))
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


def cache_key(messages: Sequence[dict[str, str]], params: GenParams) -> str:
    """Stable content hash over the request; equal inputs give equal keys
    across processes and platforms."""
    payload = {
        "messages": list(messages),
        "model": params.model_name,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


Transport = Callable[[Sequence[dict[str, str]], GenParams], str]


def http_transport(base_url: str | None = None, api_key: str | None = None) -> Transport:
    """Default transport speaking the common chat-completion HTTP JSON shape."""
    base = (base_url or os.environ.get("DFQA_LLM_BASE_URL", "")).rstrip("/")
    key = api_key if api_key is not None else os.environ.get("DFQA_LLM_API_KEY", "")

    def call(messages: Sequence[dict[str, str]], params: GenParams) -> str:
        if not base:
            raise TransportError("no endpoint configured (set DFQA_LLM_BASE_URL)")
        body = json.dumps(
            {
                "model": params.model_name,
                "messages": list(messages),
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
            }
        ).encode("utf-8")
        request = urllib.request.Request(
            f"{base}/chat/completions",
            data=body,
            headers={
                "Content-Type": "application/json",
                **({"Authorization": f"Bearer {key}"} if key else {}),
            },
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=params.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as e:
            if e.code == 429:
                raise RateLimited(f"rate limited: {e}") from e
            raise TransportError(f"http {e.code}: {e.reason}") from e
        except TimeoutError as e:
            raise Timeout(str(e)) from e
        except urllib.error.URLError as e:
            if isinstance(e.reason, TimeoutError) or "timed out" in str(e.reason):
                raise Timeout(str(e)) from e
            raise TransportError(str(e)) from e
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed completion payload: {payload!r}") from e

    return call


class Gateway:
    """Thread-safe completion client over a replay cache.

    mode "replay": cache only; a miss raises CacheMiss.
    mode "record": serve from cache, fill misses via the transport, persist.
    """

    MAX_ATTEMPTS = 5
    BACKOFF_BASE = 1.0

    def __init__(
        self,
        cache_dir: str | Path,
        mode: str = "replay",
        transport: Transport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        if mode not in ("replay", "record"):
            raise ValueError(f"unknown mode {mode!r}")
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.mode = mode
        self._transport = transport
        self._sleep = sleeper
        self._rng = rng or random.Random()
        self._lock = threading.Lock()
        self._in_flight: dict[str, threading.Event] = {}
        self.network_calls = 0

    def _path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def _read_cache(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return entry["response"]["text"]

    def put(self, messages: Sequence[dict[str, str]], params: GenParams, text: str) -> str:
        """Seed the cache with a known completion (fixtures, migrations);
        returns the cache key."""
        key = cache_key(messages, params)
        self._write_cache(key, messages, params, text)
        return key

    def _write_cache(self, key: str, messages: Sequence[dict[str, str]], params: GenParams, text: str) -> None:
        entry = {
            "key": key,
            "request": {
                "messages": list(messages),
                "model": params.model_name,
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
            },
            "response": {"text": text},
        }
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(entry, ensure_ascii=False, indent=2), encoding="utf-8")
        tmp.replace(path)

    def _call_with_retry(self, messages: Sequence[dict[str, str]], params: GenParams) -> str:
        transport = self._transport or http_transport()
        for attempt in range(self.MAX_ATTEMPTS):
            try:
                self.network_calls += 1
                return transport(messages, params)
            except RateLimited:
                if attempt == self.MAX_ATTEMPTS - 1:
                    raise
                delay = self.BACKOFF_BASE * (2**attempt) * (1 + self._rng.random() * 0.25)
                self._sleep(delay)
        raise TransportError("unreachable")

    def complete(self, messages: Sequence[dict[str, str]], params: GenParams) -> str:
        key = cache_key(messages, params)
        cached = self._read_cache(key)
        if cached is not None:
            return cached
        if self.mode == "replay":
            raise CacheMiss(f"no cache entry for {key} (replay-only mode)")

        # collapse concurrent identical requests into one network call
        with self._lock:
            waiter = self._in_flight.get(key)
            if waiter is None:
                self._in_flight[key] = threading.Event()
        if waiter is not None:
            waiter.wait()
            cached = self._read_cache(key)
            if cached is not None:
                return cached
            raise TransportError(f"concurrent request for {key} failed upstream")

        try:
            cached = self._read_cache(key)
            if cached is not None:
                return cached
            text = self._call_with_retry(messages, params)
            self._write_cache(key, messages, params, text)
            return text
        finally:
            with self._lock:
                self._in_flight.pop(key).set()

    def complete_batch(
        self,
        requests: Sequence[tuple[Sequence[dict[str, str]], GenParams]],
        max_in_flight: int = 4,
    ) -> list[str | GatewayError]:
        """Run many completions with a concurrency ceiling; the result list is
        in request order and failures occupy their own slot as exceptions."""
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if not requests:
            return []
        results: list[str | GatewayError] = [TransportError("not run")] * len(requests)

        def run(i: int) -> None:
            messages, params = requests[i]
            try:
                results[i] = self.complete(messages, params)
            except GatewayError as e:
                results[i] = e

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            list(pool.map(run, range(len(requests))))
        return results
