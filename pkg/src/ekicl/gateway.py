"""Chat-completion dispatch: one real HTTP backend plus three test mocks.

The HTTP backend speaks the OpenAI-compatible chat-completions shape with
bounded retries (exponential backoff from a 250 ms base, doubling per
attempt, with seeded jitter) and bounded batch concurrency. The mock
backends are pure functions of the prompt spec and config, so pipeline
tests run deterministically with no network:

  mock-echo       answers with the first demonstration's label word
  mock-threshold  answers ad_word iff the confidence hint reaches 0.5
  mock-fixed      always answers the configured reply

Mocks that lack the information they key on answer "unknown", which the
completion parser maps to an abstention.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import requests

from .errors import DataError, GatewayTimeout, TransportError
from .prompts import PromptSpec

BACKENDS = ("http", "mock-echo", "mock-threshold", "mock-fixed")

_BACKOFF_BASE_MS = 250.0
_BACKOFF_FACTOR = 2.0
_JITTER_FRACTION = 0.25

_ABSTAIN_TEXT = "unknown"


@dataclass(frozen=True)
class GatewayConfig:
    backend: str = "mock-echo"
    base_url: str = ""
    api_key_env_var: str = ""
    model_name: str = ""
    temperature: float = 0.0
    max_tokens: int = 8
    timeout_ms: float = 30_000.0
    max_retries: int = 2
    max_in_flight: int = 4
    fixed_reply: str = "unknown"
    retry_seed: int = 0

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise DataError(f"unknown backend {self.backend!r}")
        if self.max_in_flight < 1:
            raise DataError("max_in_flight must be at least 1")
        if self.timeout_ms <= 0:
            raise DataError("timeout must be positive")
        if self.max_retries < 0:
            raise DataError("max_retries must be non-negative")
        if self.backend == "http" and (not self.base_url or not self.model_name):
            raise DataError("http backend requires base_url and model_name")


@dataclass(frozen=True)
class Completion:
    text: str
    latency_ms: float = 0.0
    retries: int = 0


def request_body(prompt: str, config: GatewayConfig) -> bytes:
    """Byte-stable chat-completions request body for a prompt."""
    doc = {
        "model": config.model_name,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
        "messages": [{"role": "user", "content": prompt}],
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def _mock_reply(spec: PromptSpec, config: GatewayConfig) -> str:
    if config.backend == "mock-echo":
        return spec.demos[0][1] if spec.demos else _ABSTAIN_TEXT
    if config.backend == "mock-threshold":
        if spec.conf_hint is None:
            return _ABSTAIN_TEXT
        pair = spec.label_pair
        return pair.ad_word if spec.conf_hint >= 0.5 else pair.hc_word
    if config.backend == "mock-fixed":
        return config.fixed_reply
    raise DataError(f"not a mock backend: {config.backend!r}")


def _extract_text(payload: object) -> str:
    try:
        text = payload["choices"][0]["message"]["content"]  # type: ignore[index]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed completion payload: {exc!r}") from exc
    if not isinstance(text, str):
        raise TransportError("completion content is not text")
    return text


def _complete_http(prompt: str, config: GatewayConfig) -> Completion:
    url = config.base_url.rstrip("/") + "/v1/chat/completions"
    body = request_body(prompt, config)
    headers = {"Content-Type": "application/json"}
    if config.api_key_env_var:
        token = os.environ.get(config.api_key_env_var)
        if token:
            headers["Authorization"] = f"Bearer {token}"

    rng = np.random.Generator(np.random.PCG64(config.retry_seed))
    attempts = config.max_retries + 1
    started = time.monotonic()
    failure = "no attempt made"
    timed_out = False
    for attempt in range(attempts):
        try:
            resp = requests.post(
                url, data=body, headers=headers, timeout=config.timeout_ms / 1000.0
            )
            if 200 <= resp.status_code < 300:
                text = _extract_text(resp.json())
                latency = (time.monotonic() - started) * 1000.0
                return Completion(text=text, latency_ms=latency, retries=attempt)
            failure = f"HTTP {resp.status_code}"
            timed_out = False
        except requests.Timeout:
            failure = f"timeout after {config.timeout_ms:.0f} ms"
            timed_out = True
        except (ValueError, requests.RequestException) as exc:
            failure = f"{type(exc).__name__}: {exc}"
            timed_out = False
        if attempt < attempts - 1:
            base = _BACKOFF_BASE_MS * _BACKOFF_FACTOR**attempt
            delay_ms = base * (1.0 + rng.uniform(0.0, _JITTER_FRACTION))
            time.sleep(delay_ms / 1000.0)
    message = f"{failure} ({attempts} attempts to {url})"
    raise GatewayTimeout(message) if timed_out else TransportError(message)


def complete(prompt: str, spec: PromptSpec, config: GatewayConfig) -> Completion:
    """One completion; mocks are pure and instantaneous, http may retry."""
    if config.backend == "http":
        return _complete_http(prompt, config)
    return Completion(text=_mock_reply(spec, config))


BatchResult = Union[Completion, TransportError]


def complete_batch(
    requests_in: Sequence[tuple[str, PromptSpec]], config: GatewayConfig
) -> list[BatchResult]:
    """Completions in request order; transport failures become per-item results.

    HTTP requests run on at most max_in_flight worker threads; mock
    backends are evaluated sequentially.
    """
    if config.backend != "http":
        return [complete(prompt, spec, config) for prompt, spec in requests_in]

    def one(item: tuple[str, PromptSpec]) -> BatchResult:
        try:
            return complete(item[0], item[1], config)
        except TransportError as exc:  # GatewayTimeout included
            return exc

    with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
        return list(pool.map(one, requests_in))
