from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wgreport.corpus import build_corpus
from wgreport.http import Response, TransportError
from wgreport.index import index_corpus
from wgreport.ingest import SourceConfig, fetch_sessions, load_attendance
from wgreport.llm.backends import Backend, BackendStatus
from wgreport.resolve import resolve_attendance

FIXTURES = Path(__file__).parent / "fixtures"
MIRROR = FIXTURES / "mirror"
STAMP = datetime(2024, 3, 26, 12, 0, tzinfo=timezone.utc)


class ScriptedTransport:
    """Replays canned responses keyed by URL; records every call."""

    def __init__(self, routes: dict[str, list[int | tuple[int, str] | Exception]]):
        self.routes = {url: list(script) for url, script in routes.items()}
        self.calls: list[tuple[str, str, bytes | None]] = []

    def __call__(self, method, url, body=None, headers=None, timeout_s=30.0):
        self.calls.append((method, url, body))
        script = self.routes.get(url)
        if not script:
            return Response(404, b"not found")
        step = script.pop(0) if len(script) > 1 else script[0]
        if isinstance(step, Exception):
            raise step
        if isinstance(step, int):
            return Response(step, b"")
        status, text = step
        return Response(status, text.encode("utf-8"))


class ScriptedBackend(Backend):
    """Backend whose replies follow a script of statuses or reply texts."""

    name = "scripted"

    def __init__(self, script, context_tokens: int = 100_000):
        super().__init__()
        self.script = list(script)
        self.context_tokens = context_tokens
        self.requests = []

    def send(self, request):
        self.requests.append(request)
        step = self.script.pop(0) if len(self.script) > 1 else self.script[0]
        if step is TransportError:
            raise TransportError("scripted connection reset")
        if isinstance(step, int):
            if step >= 400:
                raise BackendStatus(step, "scripted")
            return "ok"
        if callable(step):
            return step(request)
        return step


@pytest.fixture
def mirror() -> Path:
    return MIRROR


@pytest.fixture
def stamp() -> datetime:
    return STAMP


@pytest.fixture(scope="session")
def fixture_corpus():
    cfg = SourceConfig(119, mirror_root=MIRROR)
    sessions = fetch_sessions(cfg)
    rows, _ = load_attendance(cfg)
    ledger, entities = resolve_attendance(rows)
    return build_corpus(sessions, ledger, entities, meeting_number=119, created_at=STAMP)


@pytest.fixture(scope="session")
def fixture_index(fixture_corpus):
    return index_corpus(fixture_corpus)


@pytest.fixture
def no_sleep():
    slept: list[float] = []
    return slept.append, slept
