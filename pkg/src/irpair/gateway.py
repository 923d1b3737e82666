"""Uniform client for chat-completion endpoints with retries and batching.

Wire protocol: OpenAI-compatible — ``POST <base_url>/v1/chat/completions``
with ``{model, messages, temperature, max_tokens[, seed]}``; reads
``choices[0].message.content`` and ``usage.{prompt,completion}_tokens``.
The API key travels only in the Authorization header, never in the body.

``mock://<behavior>`` base URLs dispatch to the deterministic in-process
backends in :mod:`irpair.mocks`; mock usage counts whitespace tokens and
reports zero wall time so artifacts stay byte-identical across runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

from . import mocks

BACKOFF_BASE = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_CAP = 30.0
BACKOFF_JITTER = 0.2
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})

ROLES = ("teacher", "student", "judge", "ranker")


class GatewayError(Exception):
    """Base class for per-request failures."""


class RequestError(GatewayError):
    """Non-retryable failure: bad input or a 4xx reply (carries the server message)."""


class TransportError(GatewayError):
    """Retries exhausted on timeouts / connection errors / retryable statuses."""


@dataclass(frozen=True)
class EndpointProfile:
    name: str
    base_url: str
    model_id: str
    role: str
    api_key_env: str | None = None
    max_retries: int = 2
    timeout: float = 60.0
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith("mock://")


@dataclass(frozen=True)
class GenerationUsage:
    prompt_tokens: int
    completion_tokens: int
    wall_time: float
    attempt_count: int
    estimated: bool = False

    def __post_init__(self) -> None:
        for name in ("prompt_tokens", "completion_tokens", "wall_time", "attempt_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    usage: GenerationUsage
    endpoint: str
    request_id: str


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def _validate_messages(messages: list[dict]) -> None:
    if not messages:
        raise RequestError("messages must be non-empty")
    for msg in messages:
        if not isinstance(msg, dict) or "role" not in msg or "content" not in msg:
            raise RequestError(f"malformed message: {msg!r}")


def _resolve_params(endpoint: EndpointProfile, overrides: dict | None) -> dict:
    params = {"temperature": endpoint.temperature, "max_tokens": endpoint.max_tokens, "seed": None}
    if overrides:
        unknown = set(overrides) - set(params)
        if unknown:
            raise RequestError(f"unknown override(s): {sorted(unknown)}")
        params.update(overrides)
    return params


def _mock_complete(endpoint: EndpointProfile, messages: list[dict], params: dict) -> GenerationResult:
    try:
        text = mocks.respond(endpoint.base_url, messages, params["temperature"], params["seed"])
    except mocks.MockError as exc:
        raise RequestError(str(exc)) from exc
    prompt_tokens = sum(whitespace_tokens(m["content"]) for m in messages)
    digest = hashlib.sha1(
        json.dumps([messages, params["seed"]], sort_keys=True).encode("utf-8")
    ).hexdigest()[:12]
    usage = GenerationUsage(
        prompt_tokens=prompt_tokens,
        completion_tokens=whitespace_tokens(text),
        wall_time=0.0,
        attempt_count=1,
    )
    return GenerationResult(text=text, usage=usage, endpoint=endpoint.name, request_id=f"mock-{digest}")


def _auth_headers(endpoint: EndpointProfile) -> dict:
    headers = {"Content-Type": "application/json"}
    if endpoint.api_key_env:
        key = os.environ.get(endpoint.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
    return headers


def _backoff_delay(attempt: int) -> float:
    delay = min(BACKOFF_CAP, BACKOFF_BASE * BACKOFF_FACTOR ** (attempt - 1))
    return delay * (1 + BACKOFF_JITTER * (2 * random.random() - 1))


def complete(
    endpoint: EndpointProfile, messages: list[dict], overrides: dict | None = None
) -> GenerationResult:
    """Run one chat completion with exponential-backoff retries.

    Retries on HTTP 429/5xx, timeouts, and connection failures up to
    ``endpoint.max_retries`` extra attempts; ``usage.attempt_count`` records
    how many attempts ran. Raises :class:`RequestError` for non-retryable
    failures and :class:`TransportError` once retries are exhausted.
    """
    _validate_messages(messages)
    params = _resolve_params(endpoint, overrides)
    if endpoint.is_mock:
        return _mock_complete(endpoint, messages, params)

    url = endpoint.base_url.rstrip("/") + "/v1/chat/completions"
    body = {
        "model": endpoint.model_id,
        "messages": messages,
        "temperature": params["temperature"],
        "max_tokens": params["max_tokens"],
    }
    if params["seed"] is not None:
        body["seed"] = params["seed"]
    headers = _auth_headers(endpoint)

    started = time.monotonic()
    last_failure = "no attempt made"
    total_attempts = endpoint.max_retries + 1
    for attempt in range(1, total_attempts + 1):
        try:
            response = requests.post(url, json=body, headers=headers, timeout=endpoint.timeout)
        except (requests.exceptions.Timeout, requests.exceptions.ConnectionError) as exc:
            last_failure = f"{type(exc).__name__}: {exc}"
            if attempt < total_attempts:
                time.sleep(_backoff_delay(attempt))
            continue
        if response.status_code in RETRYABLE_STATUS:
            last_failure = f"HTTP {response.status_code}"
            if attempt < total_attempts:
                time.sleep(_backoff_delay(attempt))
            continue
        if response.status_code >= 400:
            raise RequestError(
                f"{endpoint.name}: HTTP {response.status_code}: {response.text[:500]}"
            )
        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise RequestError(f"{endpoint.name}: malformed response body: {exc}") from exc
        usage_obj = data.get("usage") or {}
        estimated = "prompt_tokens" not in usage_obj or "completion_tokens" not in usage_obj
        usage = GenerationUsage(
            prompt_tokens=usage_obj.get(
                "prompt_tokens", sum(whitespace_tokens(m["content"]) for m in messages)
            ),
            completion_tokens=usage_obj.get("completion_tokens", whitespace_tokens(text)),
            wall_time=time.monotonic() - started,
            attempt_count=attempt,
            estimated=estimated,
        )
        return GenerationResult(
            text=text,
            usage=usage,
            endpoint=endpoint.name,
            request_id=str(data.get("id", "")),
        )
    raise TransportError(
        f"{endpoint.name}: {last_failure} after {total_attempts} attempt(s)"
    )


def complete_batch(
    endpoint: EndpointProfile,
    requests_list: list[list[dict]],
    parallelism: int,
    overrides: dict | list[dict | None] | None = None,
) -> list[GenerationResult | GatewayError]:
    """Run many completions with at most ``parallelism`` in flight.

    Output order equals input order regardless of completion order, and a
    failing item surfaces as its exception in-place rather than aborting the
    batch. ``overrides`` may be one dict for all items or a per-item list.
    """
    if parallelism < 1:
        raise RequestError(f"parallelism must be >= 1, got {parallelism}")
    if isinstance(overrides, list):
        if len(overrides) != len(requests_list):
            raise RequestError(
                f"got {len(overrides)} overrides for {len(requests_list)} requests"
            )
        per_item = overrides
    else:
        per_item = [overrides] * len(requests_list)
    if not requests_list:
        return []

    def run_one(args: tuple[list[dict], dict | None]) -> GenerationResult | GatewayError:
        messages, item_overrides = args
        try:
            return complete(endpoint, messages, item_overrides)
        except GatewayError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=min(parallelism, len(requests_list))) as pool:
        return list(pool.map(run_one, zip(requests_list, per_item)))
