"""Minimal HTTP plumbing shared by the ingest client and the LLM backends.

A transport is any callable ``(method, url, body, headers, timeout_s) ->
Response``. Tests swap in scripted transports; production uses
:class:`UrllibTransport`. Transports raise :class:`TransportError` for
connection-level failures and return non-2xx statuses as ordinary responses.
"""

from __future__ import annotations

import logging
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Response:
    status: int
    body: bytes

    @property
    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


class TransportError(OSError):
    """Connection refused, DNS failure, timeout and the like."""


class Transport(Protocol):
    def __call__(
        self,
        method: str,
        url: str,
        body: bytes | None = None,
        headers: Mapping[str, str] | None = None,
        timeout_s: float = 30.0,
    ) -> Response: ...


class UrllibTransport:
    def __call__(
        self,
        method: str,
        url: str,
        body: bytes | None = None,
        headers: Mapping[str, str] | None = None,
        timeout_s: float = 30.0,
    ) -> Response:
        req = urllib.request.Request(url, data=body, method=method, headers=dict(headers or {}))
        try:
            with urllib.request.urlopen(req, timeout=timeout_s) as resp:
                return Response(resp.status, resp.read())
        except urllib.error.HTTPError as exc:
            return Response(exc.code, exc.read() or b"")
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransportError(f"{method} {url}: {exc}") from exc


def get_with_retry(
    transport: Transport,
    url: str,
    *,
    timeout_s: float,
    attempts: int = 3,
    base_backoff_ms: int = 500,
    sleep: Callable[[float], None] = time.sleep,
) -> Response:
    """GET ``url``, retrying transport errors and 5xx with exponential backoff.

    Returns the final response (which may still be a 4xx or 5xx); raises the
    last :class:`TransportError` if every attempt failed at the transport level.
    """
    last_exc: TransportError | None = None
    resp: Response | None = None
    for attempt in range(attempts):
        try:
            resp = transport("GET", url, None, {"Accept": "application/json, text/plain"}, timeout_s)
            last_exc = None
            if resp.status < 500:
                return resp
        except TransportError as exc:
            last_exc = exc
        if attempt + 1 < attempts:
            delay = base_backoff_ms * (2**attempt) / 1000.0
            logger.debug("retrying %s in %.1fs (attempt %d)", url, delay, attempt + 1)
            sleep(delay)
    if last_exc is not None:
        raise last_exc
    assert resp is not None
    return resp
