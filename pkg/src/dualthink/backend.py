"""Model backends: an HTTP chat-completions client and a scripted stand-in.

Both implement the one-method :class:`LLMBackend` protocol, so the engine,
benchmark harness, and tests are indifferent to where completions come from.
Token usage is taken from the server when reported and estimated from
character counts otherwise, with the estimate flagged as such.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol, Sequence

import requests

from .errors import (
    BackendError,
    BackendExhausted,
    BackendHTTPError,
    BackendTimeout,
    ConfigError,
)
from .types import TokenUsage

logger = logging.getLogger(__name__)


def estimate_tokens(text: str) -> int:
    """Characters / 4, rounded up. Crude, but stable and monotone."""
    return (len(text) + 3) // 4


@dataclass(frozen=True)
class ChatRequest:
    system_text: str
    user_text: str
    temperature: float = 0.0
    max_tokens: int = 1024
    stop: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.user_text:
            raise ConfigError("user_text must be non-empty")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class Completion:
    text: str
    usage: TokenUsage
    model_id: str = ""
    latency_ms: int = 0
    usage_estimated: bool = False


class LLMBackend(Protocol):
    def complete(self, request: ChatRequest) -> Completion: ...


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff with a cap; delays are deterministic."""

    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_max: float = 8.0

    def delay(self, attempt: int) -> float:
        """Seconds to sleep after failed attempt ``attempt`` (1-based)."""
        return min(self.backoff_base * (2 ** (attempt - 1)), self.backoff_max)


class HttpChatBackend:
    """Client for an OpenAI-style ``POST {endpoint}/chat/completions`` API.

    Retries transport errors, 429, and 5xx responses per the retry policy;
    other 4xx responses fail immediately. The API key is read from an
    environment variable, never from config files.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "LLM_API_KEY",
        timeout: float = 60.0,
        retry: RetryPolicy = RetryPolicy(),
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        if not endpoint:
            raise ConfigError("backend endpoint must be non-empty")
        if not model:
            raise ConfigError("backend model must be non-empty")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retry = retry
        self._session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: ChatRequest) -> Completion:
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.stop:
            payload["stop"] = list(request.stop)
        url = f"{self.endpoint}/chat/completions"

        last_error: Exception | None = None
        for attempt in range(1, self.retry.max_attempts + 1):
            started = time.monotonic()
            try:
                response = self._session.post(
                    url, json=payload, headers=self._headers(), timeout=self.timeout
                )
            except requests.Timeout as exc:
                last_error = BackendTimeout(f"request timed out after {self.timeout}s")
                logger.warning("attempt %d/%d: %s", attempt, self.retry.max_attempts, exc)
            except requests.RequestException as exc:
                last_error = BackendError(f"transport error: {exc}")
                logger.warning("attempt %d/%d: %s", attempt, self.retry.max_attempts, exc)
            else:
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = BackendHTTPError(
                        response.status_code, _body_snippet(response)
                    )
                    logger.warning(
                        "attempt %d/%d: HTTP %d",
                        attempt,
                        self.retry.max_attempts,
                        response.status_code,
                    )
                elif response.status_code >= 400:
                    raise BackendHTTPError(response.status_code, _body_snippet(response))
                else:
                    latency_ms = int((time.monotonic() - started) * 1000)
                    return self._parse_response(request, response, latency_ms)
            if attempt < self.retry.max_attempts:
                self._sleep(self.retry.delay(attempt))
        if isinstance(last_error, BackendTimeout):
            raise last_error
        raise BackendExhausted(
            f"gave up after {self.retry.max_attempts} attempts: {last_error}"
        )

    def _parse_response(
        self, request: ChatRequest, response: requests.Response, latency_ms: int
    ) -> Completion:
        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed response body: {exc}") from exc
        if text is None:
            text = ""
        usage_raw = data.get("usage") or {}
        prompt_tokens = usage_raw.get("prompt_tokens")
        completion_tokens = usage_raw.get("completion_tokens")
        estimated = prompt_tokens is None or completion_tokens is None
        if prompt_tokens is None:
            prompt_tokens = estimate_tokens(request.system_text) + estimate_tokens(
                request.user_text
            )
        if completion_tokens is None:
            completion_tokens = estimate_tokens(text)
        return Completion(
            text=text,
            usage=TokenUsage(int(prompt_tokens), int(completion_tokens)),
            model_id=str(data.get("model", self.model)),
            latency_ms=latency_ms,
            usage_estimated=estimated,
        )


def _body_snippet(response: requests.Response, limit: int = 200) -> str:
    try:
        return response.text[:limit]
    except Exception:
        return ""


@dataclass
class ScriptEntry:
    """One canned completion; ``matcher`` restricts which prompts it answers.

    A None matcher matches any prompt. ``usage`` overrides the estimated
    token counts (and marks them as server-reported).
    """

    completion: str
    matcher: str | None = None
    usage: TokenUsage | None = None
    consumed: bool = field(default=False, compare=False)


class ScriptedBackend:
    """Deterministic backend that replays canned completions.

    Each call consumes the first unconsumed entry whose matcher occurs in
    the rendered prompt (system + user). Raises BackendExhausted when no
    entry is left to answer a prompt, which makes over-calling loud in
    tests.
    """

    def __init__(self, entries: Iterable[ScriptEntry], model_id: str = "scripted"):
        self.entries = list(entries)
        self.model_id = model_id
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> Completion:
        prompt = request.system_text + "\n" + request.user_text
        with self._lock:
            self.calls.append(request)
            for entry in self.entries:
                if entry.consumed:
                    continue
                if entry.matcher is not None and entry.matcher not in prompt:
                    continue
                entry.consumed = True
                if entry.usage is not None:
                    return Completion(
                        text=entry.completion,
                        usage=entry.usage,
                        model_id=self.model_id,
                        usage_estimated=False,
                    )
                usage = TokenUsage(
                    estimate_tokens(request.system_text) + estimate_tokens(request.user_text),
                    estimate_tokens(entry.completion),
                )
                return Completion(
                    text=entry.completion,
                    usage=usage,
                    model_id=self.model_id,
                    usage_estimated=True,
                )
        raise BackendExhausted(
            f"script has no entry left for prompt starting {request.user_text[:80]!r}"
        )

    @property
    def remaining(self) -> int:
        with self._lock:
            return sum(1 for e in self.entries if not e.consumed)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        """Load entries from JSON: a list of {completion, matcher?, usage?}."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load script {path}: {exc}") from exc
        if not isinstance(data, list):
            raise ConfigError(f"script {path} must be a JSON list")
        entries = []
        for i, item in enumerate(data):
            if isinstance(item, str):
                entries.append(ScriptEntry(completion=item))
                continue
            if not isinstance(item, dict) or "completion" not in item:
                raise ConfigError(f"script {path} entry {i}: need a 'completion' field")
            usage = None
            if "usage" in item:
                usage = TokenUsage(
                    int(item["usage"].get("prompt_tokens", 0)),
                    int(item["usage"].get("completion_tokens", 0)),
                )
            entries.append(
                ScriptEntry(
                    completion=str(item["completion"]),
                    matcher=item.get("matcher"),
                    usage=usage,
                )
            )
        return cls(entries)


def scripted_backend(*entries: str | tuple[str, str] | ScriptEntry) -> ScriptedBackend:
    """Shorthand: strings, (matcher, completion) pairs, or ScriptEntry values."""
    built = []
    for entry in entries:
        if isinstance(entry, ScriptEntry):
            built.append(entry)
        elif isinstance(entry, tuple):
            matcher, completion = entry
            built.append(ScriptEntry(completion=completion, matcher=matcher))
        else:
            built.append(ScriptEntry(completion=entry))
    return ScriptedBackend(built)


@dataclass(frozen=True)
class BackendSpec:
    """Declarative backend selection, as read from config files or flags."""

    kind: str = "http"
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "LLM_API_KEY"
    timeout: float = 60.0
    max_attempts: int = 3
    script_path: str = ""

    def build(self) -> LLMBackend:
        if self.kind == "http":
            return HttpChatBackend(
                endpoint=self.endpoint,
                model=self.model,
                api_key_env=self.api_key_env,
                timeout=self.timeout,
                retry=RetryPolicy(max_attempts=self.max_attempts),
            )
        if self.kind == "scripted":
            if not self.script_path:
                raise ConfigError("scripted backend needs a script_path")
            return ScriptedBackend.from_file(self.script_path)
        raise ConfigError(f"unknown backend kind {self.kind!r} (use 'http' or 'scripted')")
