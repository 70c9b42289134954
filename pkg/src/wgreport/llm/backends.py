"""Completion backends, rate limiting and retry."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

from ..errors import BackendError, ContextOverflow, RateLimitExhausted
from ..http import Transport, TransportError, UrllibTransport
from ..index import est_tokens

logger = logging.getLogger(__name__)

API_KEY_ENV = "INSIGHTS_API_KEY"
API_BASE_ENV = "INSIGHTS_API_BASE"
WINDOW_S = 60.0


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    max_output_tokens: int = 1024
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    @property
    def prompt_tokens(self) -> int:
        return est_tokens(self.system_prompt + self.user_prompt)


@dataclass(frozen=True)
class BackendPolicy:
    max_retries: int = 3
    base_backoff_ms: int = 500
    requests_per_minute: int = 60

    def __post_init__(self) -> None:
        if self.max_retries < 0 or self.base_backoff_ms <= 0 or self.requests_per_minute <= 0:
            raise ValueError(f"invalid backend policy {self}")


class TokenBucket:
    """Bucket of ``capacity`` tokens; a spent token comes back one window later.

    Refunding each token exactly ``window_s`` after use (rather than refilling
    continuously) caps dispatches in *any* window at ``capacity``.
    """

    def __init__(
        self,
        capacity: int,
        window_s: float = WINDOW_S,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.window_s = window_s
        self._clock = clock
        self._sleep = sleep
        self._spent: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Block until a token is available; returns the dispatch time."""
        while True:
            with self._lock:
                now = self._clock()
                while self._spent and self._spent[0] + self.window_s <= now:
                    self._spent.popleft()
                if len(self._spent) < self.capacity:
                    self._spent.append(now)
                    return now
                wait = self._spent[0] + self.window_s - now
            self._sleep(wait)


class BackendStatus(Exception):
    """Non-2xx reply from a backend."""

    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}: {detail[:200]}")


class Backend:
    """Base class; subclasses implement :meth:`send`.

    ``send`` raises :class:`BackendStatus` for HTTP errors and
    :class:`~wgreport.http.TransportError` for connection failures.
    """

    name = "backend"
    context_tokens = 8192

    def __init__(self) -> None:
        self._limiter: TokenBucket | None = None
        self._limiter_lock = threading.Lock()

    def limiter(self, policy: BackendPolicy, clock=time.monotonic, sleep=time.sleep) -> TokenBucket:
        with self._limiter_lock:
            if self._limiter is None or self._limiter.capacity != policy.requests_per_minute:
                self._limiter = TokenBucket(policy.requests_per_minute, clock=clock, sleep=sleep)
            return self._limiter

    def send(self, request: CompletionRequest) -> str:
        raise NotImplementedError


def _retryable(status: int) -> bool:
    return status == 429 or status >= 500


def complete(
    backend: Backend,
    request: CompletionRequest,
    policy: BackendPolicy | None = None,
    *,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Send ``request`` through ``backend`` with rate limiting and retries.

    429, 5xx and transport failures are retried after ``base * 2**attempt``
    ms, for at most ``max_retries + 1`` attempts in total.
    """
    policy = policy or BackendPolicy()
    needed = request.prompt_tokens + request.max_output_tokens
    if needed > backend.context_tokens:
        raise ContextOverflow(
            f"request needs ~{needed} tokens but {backend.name} holds {backend.context_tokens}"
        )
    limiter = backend.limiter(policy)
    last_status: int | None = None
    attempts = policy.max_retries + 1
    for attempt in range(attempts):
        limiter.acquire()
        try:
            return backend.send(request)
        except BackendStatus as exc:
            if not _retryable(exc.status):
                raise BackendError(f"{backend.name}: {exc}", exc.status) from exc
            last_status = exc.status
            logger.warning("%s: %s (attempt %d/%d)", backend.name, exc, attempt + 1, attempts)
        except TransportError as exc:
            last_status = None
            logger.warning("%s: %s (attempt %d/%d)", backend.name, exc, attempt + 1, attempts)
        if attempt + 1 < attempts:
            sleep(policy.base_backoff_ms * (2**attempt) / 1000.0)
    raise RateLimitExhausted(
        f"{backend.name}: giving up after {attempts} attempts (last status {last_status})",
        attempts,
        last_status,
    )


class _HttpBackend(Backend):
    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        context_tokens: int,
        path: str,
        transport: Transport | None = None,
        timeout_s: float = 120.0,
    ):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.context_tokens = context_tokens
        self.path = path
        self.transport = transport or UrllibTransport()
        self.timeout_s = timeout_s
        self.name = f"{type(self).__name__}({model})"

    def _headers(self) -> dict[str, str]:
        return {"Content-Type": "application/json"}

    def _post(self, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        resp = self.transport("POST", self.base_url + self.path, body, self._headers(), self.timeout_s)
        if not resp.ok:
            raise BackendStatus(resp.status, resp.text)
        try:
            data = json.loads(resp.text)
        except json.JSONDecodeError as exc:
            raise BackendError(f"{self.name}: reply is not JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise BackendError(f"{self.name}: reply is not a JSON object")
        return data


class ApiBackend(_HttpBackend):
    """OpenAI-style ``/v1/chat/completions`` endpoint."""

    def __init__(
        self,
        model: str,
        base_url: str | None = None,
        api_key: str | None = None,
        *,
        context_tokens: int = 128_000,
        path: str = "/v1/chat/completions",
        transport: Transport | None = None,
    ):
        base_url = base_url or os.environ.get(API_BASE_ENV) or "https://api.openai.com"
        super().__init__(base_url, model, context_tokens=context_tokens, path=path, transport=transport)
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")

    def _headers(self) -> dict[str, str]:
        headers = super()._headers()
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def send(self, request: CompletionRequest) -> str:
        data = self._post(
            {
                "model": self.model,
                "messages": [
                    {"role": "system", "content": request.system_prompt},
                    {"role": "user", "content": request.user_prompt},
                ],
                "max_tokens": request.max_output_tokens,
                "temperature": request.temperature,
            }
        )
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"{self.name}: no choices[0].message.content in reply") from exc
        if not isinstance(content, str):
            raise BackendError(f"{self.name}: message content is not text")
        return content


class LocalBackend(_HttpBackend):
    """Ollama-style ``/api/generate`` endpoint."""

    def __init__(
        self,
        model: str,
        base_url: str = "http://localhost:11434",
        *,
        context_tokens: int = 8192,
        path: str = "/api/generate",
        transport: Transport | None = None,
    ):
        super().__init__(base_url, model, context_tokens=context_tokens, path=path, transport=transport)

    def send(self, request: CompletionRequest) -> str:
        data = self._post(
            {
                "model": self.model,
                "system": request.system_prompt,
                "prompt": request.user_prompt,
                "stream": False,
                "options": {"temperature": request.temperature, "num_predict": request.max_output_tokens},
            }
        )
        text = data.get("response")
        if not isinstance(text, str):
            raise BackendError(f"{self.name}: no 'response' text in reply")
        return text
