"""Chat-completion gateway: pre-flight token checks, retries, and offline replay.

Two wire dialects are supported (an OpenAI/OpenRouter-style chat body and an
Anthropic-style body) plus a mock provider for tests and demos. Every call is
recorded as an append-only exchange so runs can be replayed without network
access. API keys come only from environment variables, never from config
files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

log = logging.getLogger(__name__)

PROVIDERS = ("openrouter-compatible", "anthropic-compatible", "mock")

_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
_BACKOFF_BASE_SECONDS = 1.0


class GatewayError(RuntimeError):
    pass


class ContextWindowExceeded(GatewayError):
    """Pre-flight refusal: the prompt does not fit the model's context window."""

    def __init__(self, estimate: int, limit: int):
        super().__init__(f"estimated {estimate} prompt tokens exceed the "
                         f"effective window of {limit} tokens; no request sent")
        self.estimate = estimate
        self.limit = limit


class CredentialError(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class ReplayMissError(GatewayError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    provider: str = "mock"
    model_name: str = "mock-model"
    temperature: float = 0.0
    max_output_tokens: int = 1000
    context_window: int = 128000
    api_key_env: str = "HOPCOVER_API_KEY"
    base_url: str = ""
    timeout: float = 120.0
    retries: int = 2
    window_margin: float = 0.95
    canned_response: str | None = None

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise ValueError(f"provider must be one of {PROVIDERS}, got {self.provider!r}")
        if self.context_window <= 0:
            raise ValueError("context_window must be positive")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if not 0.0 < self.window_margin <= 1.0:
            raise ValueError("window_margin must lie in (0, 1]")


@dataclass(frozen=True)
class LlmExchange:
    """One recorded request/response pair; the replay provider's unit of storage."""

    timestamp: str
    prompt_sha256: str
    prompt_text: str
    response_text: str
    input_token_estimate: int
    output_token_estimate: int
    provider: str
    model: str
    http_status: int
    latency_seconds: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LlmExchange":
        return cls(**json.loads(text))


def estimate_tokens(text: str) -> int:
    """Heuristic token count: ceil(utf-8 bytes / 4).

    Deliberately crude and overestimate-tolerant; it is not any provider's
    tokenizer and exists to drive the pre-flight window check.
    """
    if not text:
        return 0
    return math.ceil(len(text.encode("utf-8")) / 4)


def _rendered(prompt) -> str:
    return prompt.rendered if hasattr(prompt, "rendered") else str(prompt)


def prompt_hash(prompt) -> str:
    return hashlib.sha256(_rendered(prompt).encode("utf-8")).hexdigest()


def _requests_transport(url: str, headers: dict, payload: dict,
                        timeout: float) -> tuple[int, dict]:
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(f"request failed: {exc}") from exc
    try:
        body = response.json()
    except ValueError:
        body = {}
    return response.status_code, body


def _build_request(config: ModelConfig, prompt_text: str) -> tuple[str, dict, dict,
                                                                   Callable[[dict], str]]:
    if config.provider == "anthropic-compatible":
        url = (config.base_url or "https://api.anthropic.com").rstrip("/") + "/v1/messages"
        headers = {"x-api-key": os.environ[config.api_key_env],
                   "anthropic-version": "2023-06-01",
                   "content-type": "application/json"}
        payload = {"model": config.model_name,
                   "max_tokens": config.max_output_tokens,
                   "temperature": config.temperature,
                   "messages": [{"role": "user", "content": prompt_text}]}

        def extract(body: dict) -> str:
            return body["content"][0]["text"]
    else:
        url = (config.base_url or "https://openrouter.ai/api/v1").rstrip("/") \
            + "/chat/completions"
        headers = {"Authorization": f"Bearer {os.environ[config.api_key_env]}",
                   "content-type": "application/json"}
        payload = {"model": config.model_name,
                   "max_tokens": config.max_output_tokens,
                   "temperature": config.temperature,
                   "messages": [{"role": "user", "content": prompt_text}]}

        def extract(body: dict) -> str:
            return body["choices"][0]["message"]["content"]
    return url, headers, payload, extract


def execute(prompt, config: ModelConfig, *,
            transport: Callable[[str, dict, dict, float], tuple[int, dict]] | None = None,
            exchange_log: str | Path | None = None,
            sleep: Callable[[float], None] = time.sleep) -> str:
    """Run a prompt against the configured provider and return the answer text.

    Refuses before any network activity when the token estimate plus the
    response budget exceeds the margin-adjusted context window. Transient
    failures (429 and 5xx) are retried with exponential backoff up to
    config.retries times; auth failures are raised immediately.
    """
    prompt_text = _rendered(prompt)
    estimate = estimate_tokens(prompt_text)
    limit = int(config.context_window * config.window_margin)
    if estimate + config.max_output_tokens > limit:
        raise ContextWindowExceeded(estimate, limit)

    started = time.perf_counter()
    if config.provider == "mock":
        if config.canned_response is None:
            raise ValueError("mock provider needs a canned_response")
        response_text, status = config.canned_response, 200
    else:
        if config.api_key_env not in os.environ:
            raise CredentialError(f"environment variable {config.api_key_env} is not set")
        url, headers, payload, extract = _build_request(config, prompt_text)
        send = transport or _requests_transport
        status, body = _attempt_with_retries(send, url, headers, payload, config, sleep)
        try:
            response_text = extract(body)
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed provider response: {body!r}") from exc

    exchange = LlmExchange(
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        prompt_sha256=prompt_hash(prompt_text),
        prompt_text=prompt_text,
        response_text=response_text,
        input_token_estimate=estimate,
        output_token_estimate=estimate_tokens(response_text),
        provider=config.provider,
        model=config.model_name,
        http_status=200 if config.provider == "mock" else status,
        latency_seconds=time.perf_counter() - started,
    )
    if exchange_log is not None:
        append_exchange(exchange_log, exchange)
    return response_text


def _attempt_with_retries(send, url, headers, payload, config: ModelConfig,
                          sleep) -> tuple[int, dict]:
    last_status = None
    for attempt in range(config.retries + 1):
        status, body = send(url, headers, payload, config.timeout)
        if status in (401, 403):
            raise CredentialError(f"provider rejected credentials (HTTP {status})")
        if status < 400:
            return status, body
        if status in _RETRYABLE_STATUSES and attempt < config.retries:
            delay = _BACKOFF_BASE_SECONDS * (2 ** attempt)
            log.warning("transient HTTP %d, retrying in %.1fs", status, delay)
            sleep(delay)
            last_status = status
            continue
        raise TransportError(f"provider returned HTTP {status}: {body!r}")
    raise TransportError(f"retries exhausted, last HTTP status {last_status}")


def append_exchange(path: str | Path, exchange: LlmExchange) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(exchange.to_json() + "\n")


def read_exchange_log(path: str | Path) -> list[LlmExchange]:
    exchanges = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                exchanges.append(LlmExchange.from_json(line))
    return exchanges


def replay(exchange_log: str | Path, prompt) -> str:
    """Return the recorded response for this exact prompt; no network involved.

    The most recent matching exchange wins. A changed prompt (different hash)
    raises ReplayMissError.
    """
    wanted = prompt_hash(prompt)
    found: str | None = None
    for exchange in read_exchange_log(exchange_log):
        if exchange.prompt_sha256 == wanted:
            found = exchange.response_text
    if found is None:
        raise ReplayMissError(f"no recorded exchange matches prompt hash {wanted}")
    return found
