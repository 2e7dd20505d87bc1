"""Chat-completion client with bounded concurrency, retries, and a scriptable mock.

The wire protocol is OpenAI-compatible `/v1/chat/completions` JSON; images
travel as base64 data-URL content parts. Captions route to a text-only
endpoint, every other category to a multimodal one.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import mimetypes
import os
import random
import threading
import time
from collections.abc import Callable, Iterable, Iterator, Sequence
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .corpus import Category

log = logging.getLogger(__name__)

MULTIMODAL = "multimodal"
TEXT_ONLY = "text_only"

BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_CAP = 30.0


class ConfigError(Exception):
    pass


class RequestFailed(Exception):
    def __init__(self, message: str, attempts: int, cause: Exception | None = None) -> None:
        super().__init__(message)
        self.attempts = attempts
        self.cause = cause


class TransportError(Exception):
    """A single failed exchange with an endpoint."""

    def __init__(self, message: str, transient: bool = True, malformed: bool = False) -> None:
        super().__init__(message)
        self.transient = transient
        self.malformed = malformed


@dataclass(frozen=True, slots=True)
class EndpointConfig:
    base_url: str
    model_name: str
    kind: str
    max_concurrent: int = 4
    timeout: float = 120.0
    retry_limit: int = 3
    temperature: float = 0.7
    max_tokens: int = 2048
    api_token_env: str = "FORGE_API_TOKEN"
    requests_per_second: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (MULTIMODAL, TEXT_ONLY):
            raise ConfigError(f"unknown endpoint kind {self.kind!r}")
        if self.max_concurrent < 1:
            raise ConfigError("max_concurrent must be >= 1")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0")
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError("temperature must be in [0, 2]")


@dataclass(frozen=True, slots=True)
class ChatRequest:
    """Messages plus the endpoint kind they are meant for."""

    messages: tuple[dict[str, Any], ...]
    target_kind: str
    temperature: float | None = None

    @property
    def image_part_count(self) -> int:
        count = 0
        for message in self.messages:
            content = message.get("content")
            if isinstance(content, list):
                count += sum(1 for part in content if part.get("type") == "image_url")
        return count

    @property
    def prompt_text(self) -> str:
        """All text parts concatenated; the basis of mock fingerprints."""
        chunks: list[str] = []
        for message in self.messages:
            content = message.get("content")
            if isinstance(content, str):
                chunks.append(content)
            elif isinstance(content, list):
                chunks.extend(p.get("text", "") for p in content if p.get("type") == "text")
        return "\n".join(chunks)


@dataclass(frozen=True, slots=True)
class ChatResponse:
    text: str
    attempt_count: int
    prompt_tokens: int | None = None
    completion_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.attempt_count < 1:
            raise ValueError("attempt_count must be >= 1")


def image_data_url(path: Path | str) -> str:
    path = Path(path)
    media_type = mimetypes.guess_type(path.name)[0] or "image/jpeg"
    encoded = base64.b64encode(path.read_bytes()).decode("ascii")
    return f"data:{media_type};base64,{encoded}"


def user_message(text: str, image_paths: Sequence[Path | str] = ()) -> dict[str, Any]:
    """One user message with a text part and optional image parts.

    Missing image files are skipped with a warning so mock-driven runs work
    without real pixels on disk.
    """
    parts: list[dict[str, Any]] = [{"type": "text", "text": text}]
    for path in image_paths:
        path = Path(path)
        if not path.is_file():
            log.warning("image not found, sending text only: %s", path)
            continue
        parts.append({"type": "image_url", "image_url": {"url": image_data_url(path)}})
    return {"role": "user", "content": parts}


def build_request(
    text: str,
    target_kind: str,
    image_paths: Sequence[Path | str] = (),
    temperature: float | None = None,
) -> ChatRequest:
    paths = () if target_kind == TEXT_ONLY else tuple(image_paths)
    return ChatRequest(
        messages=(user_message(text, paths),),
        target_kind=target_kind,
        temperature=temperature,
    )


# --- transports ---------------------------------------------------------------

Transport = Callable[[EndpointConfig, dict], dict]


class HttpTransport:
    """POST to `{base_url}/v1/chat/completions` with bearer auth from the environment."""

    def __call__(self, cfg: EndpointConfig, payload: dict) -> dict:
        import requests

        url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(cfg.api_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = requests.post(url, json=payload, headers=headers, timeout=cfg.timeout)
        except requests.exceptions.RequestException as exc:
            raise TransportError(f"request error: {exc}", transient=True) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"HTTP {response.status_code}", transient=True)
        if response.status_code >= 400:
            raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}",
                                 transient=False)
        try:
            return response.json()
        except ValueError as exc:
            raise TransportError("response body is not JSON", malformed=True) from exc


def fingerprint(model_name: str, prompt_text: str) -> str:
    """Stable key for scripted mock responses."""
    digest = hashlib.sha256(f"{model_name}\x00{prompt_text}".encode("utf-8"))
    return digest.hexdigest()[:32]


class MockTransport:
    """Deterministic scripted endpoint for offline runs and tests.

    Responses are keyed by `fingerprint(model, prompt_text)`; unknown prompts
    fall back through substring `rules` [(contains, text), ...], then
    `responder(model, prompt)`, then `default`, then a non-transient
    not-found error. A literal `{prompt_sha8}` in any response text is
    replaced by the prompt fingerprint's first 8 hex digits, which lets one
    rule emit distinct-but-reproducible text per prompt. Instrumented: tracks
    call count and the maximum number of concurrently in-flight requests.
    """

    def __init__(
        self,
        script: Mapping[str, str] | None = None,
        default: str | None = None,
        responder: Callable[[str, str], str | None] | None = None,
        rules: Sequence[tuple[str, str]] | None = None,
        latency: tuple[float, float] | None = None,
        seed: int = 0,
        fail_first: int = 0,
        fault: Callable[[int], None] | None = None,
    ) -> None:
        self.script = dict(script or {})
        self.default = default
        self.responder = responder
        self.rules = list(rules or [])
        self.latency = latency
        self.fail_first = fail_first
        self.fault = fault
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.calls = 0
        self.in_flight = 0
        self.max_in_flight = 0

    def script_response(self, model_name: str, prompt_text: str, text: str) -> None:
        self.script[fingerprint(model_name, prompt_text)] = text

    def __call__(self, cfg: EndpointConfig, payload: dict) -> dict:
        with self._lock:
            call_index = self.calls
            self.calls += 1
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            delay = self._rng.uniform(*self.latency) if self.latency else 0.0
        try:
            if self.fault is not None:
                self.fault(call_index)
            if delay:
                time.sleep(delay)
            if call_index < self.fail_first:
                raise TransportError("scripted transient failure", transient=True)
            prompt_text = _payload_prompt_text(payload)
            prompt_fp = fingerprint(payload.get("model", ""), prompt_text)
            text = self.script.get(prompt_fp)
            if text is None:
                for needle, rule_text in self.rules:
                    if needle in prompt_text:
                        text = rule_text
                        break
            if text is None and self.responder is not None:
                text = self.responder(payload.get("model", ""), prompt_text)
            if text is None:
                text = self.default
            if text is None:
                raise TransportError("no scripted response (404)", transient=False)
            text = text.replace("{prompt_sha8}", prompt_fp[:8])
            return {
                "choices": [{"message": {"role": "assistant", "content": text}}],
                "usage": {
                    "prompt_tokens": len(prompt_text.split()),
                    "completion_tokens": len(text.split()),
                },
            }
        finally:
            with self._lock:
                self.in_flight -= 1


def _payload_prompt_text(payload: dict) -> str:
    chunks: list[str] = []
    for message in payload.get("messages", []):
        content = message.get("content")
        if isinstance(content, str):
            chunks.append(content)
        elif isinstance(content, list):
            chunks.extend(p.get("text", "") for p in content if p.get("type") == "text")
    return "\n".join(chunks)


# --- client -------------------------------------------------------------------

class _TokenBucket:
    def __init__(self, rate: float) -> None:
        self.rate = rate
        self.capacity = max(1.0, rate)
        self.tokens = self.capacity
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self, sleep: Callable[[float], None]) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            sleep(wait)


class EndpointClient:
    """One endpoint: semaphore + optional token bucket + retry wrapper."""

    def __init__(
        self,
        cfg: EndpointConfig,
        transport: Transport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ) -> None:
        self.cfg = cfg
        self.transport = transport if transport is not None else HttpTransport()
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._semaphore = threading.BoundedSemaphore(cfg.max_concurrent)
        self._bucket = (
            _TokenBucket(cfg.requests_per_second) if cfg.requests_per_second else None
        )

    def _backoff(self, attempt: int) -> float:
        # full jitter: uniform over [0, min(cap, base * factor^(attempt-1))]
        ceiling = min(BACKOFF_CAP, BACKOFF_BASE * (BACKOFF_FACTOR ** (attempt - 1)))
        return self._rng.uniform(0.0, ceiling)

    def complete(self, request: ChatRequest) -> ChatResponse:
        """First successful completion, retrying transient failures with backoff.

        Raises ConfigError before any network activity on a kind mismatch, and
        RequestFailed once retries are exhausted or a fatal error occurs.
        """
        if request.target_kind != self.cfg.kind:
            raise ConfigError(
                f"request targets {request.target_kind}, endpoint is {self.cfg.kind}"
            )
        if self.cfg.kind == TEXT_ONLY and request.image_part_count:
            raise ConfigError("text_only request must not contain image parts")

        temperature = (
            request.temperature if request.temperature is not None else self.cfg.temperature
        )
        payload = {
            "model": self.cfg.model_name,
            "messages": [dict(m) for m in request.messages],
            "temperature": temperature,
            "max_tokens": self.cfg.max_tokens,
        }
        attempts = 0
        malformed_seen = False
        while True:
            attempts += 1
            try:
                with self._semaphore:
                    if self._bucket is not None:
                        self._bucket.acquire(self._sleep)
                    raw = self.transport(self.cfg, payload)
                return _extract_response(raw, attempts)
            except TransportError as exc:
                if exc.malformed:
                    if malformed_seen:
                        raise RequestFailed(
                            f"malformed response twice: {exc}", attempts, exc
                        ) from exc
                    malformed_seen = True
                elif not exc.transient:
                    raise RequestFailed(f"fatal endpoint error: {exc}", attempts, exc) from exc
                if attempts > self.cfg.retry_limit:
                    raise RequestFailed(
                        f"retries exhausted after {attempts} attempts: {exc}", attempts, exc
                    ) from exc
                self._sleep(self._backoff(attempts))


def _extract_response(raw: dict, attempts: int) -> ChatResponse:
    try:
        text = raw["choices"][0]["message"]["content"]
        if not isinstance(text, str):
            raise TypeError("content is not a string")
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"unexpected response shape: {exc}", malformed=True) from exc
    usage = raw.get("usage") or {}
    return ChatResponse(
        text=text,
        attempt_count=attempts,
        prompt_tokens=usage.get("prompt_tokens"),
        completion_tokens=usage.get("completion_tokens"),
    )


def route(category: Category, endpoints: Sequence[EndpointConfig]) -> EndpointConfig:
    """Caption -> first text_only endpoint; everything else -> first multimodal."""
    wanted = TEXT_ONLY if category is Category.CAPTION else MULTIMODAL
    for endpoint in endpoints:
        if endpoint.kind == wanted:
            return endpoint
    raise ConfigError(f"no {wanted} endpoint configured (needed for {category.value})")


class EndpointPool:
    """Routes categories to clients; one client (one limiter) per endpoint."""

    def __init__(self, clients: Sequence[EndpointClient]) -> None:
        if not clients:
            raise ConfigError("endpoint pool needs at least one client")
        self.clients = list(clients)

    @property
    def configs(self) -> list[EndpointConfig]:
        return [c.cfg for c in self.clients]

    def client_for(self, category: Category) -> EndpointClient:
        chosen = route(category, self.configs)
        for client in self.clients:
            if client.cfg is chosen:
                return client
        raise ConfigError("routing returned an unknown endpoint")  # unreachable

    def client_of_kind(self, kind: str) -> EndpointClient:
        for client in self.clients:
            if client.cfg.kind == kind:
                return client
        raise ConfigError(f"no {kind} endpoint configured")


def ordered_parallel_map(
    items: Iterable[Any],
    fn: Callable[[Any], Any],
    max_workers: int,
) -> Iterator[tuple[Any, Future]]:
    """Run `fn` over items with a worker pool, yielding futures in input order.

    Consumers call `.result()` as they iterate, so downstream writes happen in
    input order regardless of completion order.
    """
    items = list(items)
    if not items:
        return
    pool = ThreadPoolExecutor(max_workers=max(1, min(max_workers, len(items))))
    try:
        futures = [pool.submit(fn, item) for item in items]
        for item, future in zip(items, futures):
            yield item, future
    finally:
        # Abandoned mid-iteration (consumer raised): drop queued work promptly.
        pool.shutdown(wait=False, cancel_futures=True)
