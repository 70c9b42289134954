"""Load raw meeting records from a datatracker-style API or a local mirror.

Mirror layout::

    <mirror_root>/<meeting>/registrants.csv
    <mirror_root>/<meeting>/<wg>/minutes.md
    <mirror_root>/<meeting>/<wg>/agenda.md
    <mirror_root>/<meeting>/<wg>/attendees.csv
    <mirror_root>/<meeting>/<wg>/name.txt        (optional display name)

The mirror is produced by an external rsync step; nothing here talks rsync.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable
from urllib.parse import urljoin

from .errors import NetworkError, NotFound, ParseError
from .http import Response, Transport, TransportError, UrllibTransport, get_with_retry

logger = logging.getLogger(__name__)

ACRONYM_RE = re.compile(r"[a-z0-9-]+")
DRAFT_RE = re.compile(r"draft-[a-z0-9.-]+")
# Not preceded by a character that could continue a draft name.
_DRAFT_SCAN_RE = re.compile(r"(?<![a-z0-9.-])draft-[a-z0-9.-]*[a-z0-9]")
_VERSION_RE = re.compile(r"-\d\d$")
_FILE_SUFFIX_RE = re.compile(r"\.(txt|html|xml|pdf)$")

ATTENDANCE_HEADER = ["name", "affiliation"]
API_RETRIES = 3
API_BACKOFF_MS = 500


@dataclass(frozen=True)
class SourceConfig:
    meeting_number: int
    api_base_url: str | None = None
    mirror_root: Path | None = None
    timeout_ms: int = 30_000

    def __post_init__(self) -> None:
        if not isinstance(self.meeting_number, int) or self.meeting_number <= 0:
            raise ValueError(f"meeting_number must be a positive integer, got {self.meeting_number!r}")
        if self.api_base_url is None and self.mirror_root is None:
            raise ValueError("at least one of api_base_url / mirror_root is required")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.mirror_root is not None and not isinstance(self.mirror_root, Path):
            object.__setattr__(self, "mirror_root", Path(self.mirror_root))

    @property
    def meeting_dir(self) -> Path:
        assert self.mirror_root is not None
        return self.mirror_root / str(self.meeting_number)


@dataclass(frozen=True)
class RawSession:
    wg_acronym: str
    wg_name: str
    meeting_number: int
    agenda_text: str = ""
    minutes_text: str = ""
    draft_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not ACRONYM_RE.fullmatch(self.wg_acronym):
            raise ParseError(f"invalid working group acronym {self.wg_acronym!r}")
        for name in self.draft_names:
            if not DRAFT_RE.fullmatch(name):
                raise ParseError(f"invalid draft name {name!r}")


@dataclass(frozen=True)
class RawAttendanceRow:
    raw_name: str
    raw_affiliation: str = ""
    # None marks a meeting-wide registration row.
    session: str | None = None

    def __post_init__(self) -> None:
        if not self.raw_name.strip():
            raise ValueError("raw_name must be non-empty")

    @property
    def meeting_wide(self) -> bool:
        return self.session is None


def _strip_draft(name: str) -> str:
    name = _FILE_SUFFIX_RE.sub("", name)
    return _VERSION_RE.sub("", name)


def extract_draft_names(text: str) -> list[str]:
    """Draft identifiers mentioned in ``text``, version suffix stripped.

    Deduplicated, in order of first occurrence.
    """
    seen: dict[str, None] = {}
    for match in _DRAFT_SCAN_RE.finditer(text):
        name = _strip_draft(match.group(0))
        if DRAFT_RE.fullmatch(name) and name != "draft-":
            seen.setdefault(name, None)
    return list(seen)


def normalize_draft_list(names: list[str] | tuple[str, ...]) -> tuple[str, ...]:
    out: dict[str, None] = {}
    for raw in names:
        for name in extract_draft_names(raw.strip().lower()):
            out.setdefault(name, None)
    return tuple(out)


def decode(data: bytes) -> str:
    return data.decode("utf-8-sig", errors="replace")


def _read_text(path: Path) -> str:
    try:
        return decode(path.read_bytes())
    except FileNotFoundError:
        return ""


# --- sessions ---------------------------------------------------------------


def fetch_sessions(
    cfg: SourceConfig,
    *,
    transport: Transport | None = None,
    parallelism: int = 4,
    sleep: Callable[[float], None] = time.sleep,
) -> list[RawSession]:
    """One RawSession per working-group session of the configured meeting.

    The mirror wins when both sources are configured. Output is sorted by
    acronym, then by the session's position in the source.
    """
    if cfg.mirror_root is not None:
        return _mirror_sessions(cfg)
    return _api_sessions(cfg, transport or UrllibTransport(), parallelism, sleep)


def _session_dirs(cfg: SourceConfig) -> list[Path]:
    root = cfg.mirror_root
    assert root is not None
    if not root.is_dir():
        raise NotFound(f"mirror root {root} does not exist")
    meeting_dir = cfg.meeting_dir
    if not meeting_dir.is_dir():
        raise NotFound(f"meeting {cfg.meeting_number} not found under {root}")
    dirs = []
    for entry in sorted(meeting_dir.iterdir(), key=lambda p: p.name):
        if not entry.is_dir() or entry.name.startswith("."):
            continue
        if not ACRONYM_RE.fullmatch(entry.name):
            raise ParseError("directory name is not a working group acronym", str(entry))
        dirs.append(entry)
    return dirs


def _mirror_sessions(cfg: SourceConfig) -> list[RawSession]:
    sessions = []
    for wg_dir in _session_dirs(cfg):
        agenda = _read_text(wg_dir / "agenda.md")
        minutes = _read_text(wg_dir / "minutes.md")
        name = _read_text(wg_dir / "name.txt").strip() or wg_dir.name
        drafts = extract_draft_names(agenda + "\n" + minutes)
        sessions.append(
            RawSession(wg_dir.name, name, cfg.meeting_number, agenda, minutes, tuple(drafts))
        )
    return sessions


def _api_get(
    transport: Transport, url: str, cfg: SourceConfig, sleep: Callable[[float], None]
) -> Response:
    try:
        return get_with_retry(
            transport,
            url,
            timeout_s=cfg.timeout_ms / 1000.0,
            attempts=API_RETRIES,
            base_backoff_ms=API_BACKOFF_MS,
            sleep=sleep,
        )
    except TransportError as exc:
        raise NetworkError(f"GET {url} failed after {API_RETRIES} attempts: {exc}") from exc


def _api_sessions(
    cfg: SourceConfig, transport: Transport, parallelism: int, sleep: Callable[[float], None]
) -> list[RawSession]:
    assert cfg.api_base_url is not None
    base = cfg.api_base_url.rstrip("/") + "/"
    url = urljoin(base, f"meeting/{cfg.meeting_number}/sessions")
    resp = _api_get(transport, url, cfg, sleep)
    if resp.status == 404:
        raise NotFound(f"meeting {cfg.meeting_number} not found at {url}")
    if not resp.ok:
        raise NetworkError(f"GET {url} returned HTTP {resp.status}")
    try:
        payload = json.loads(resp.text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}", url) from exc
    if not isinstance(payload, list):
        raise ParseError("expected a JSON array of sessions", url)

    entries = []
    for i, obj in enumerate(payload):
        if not isinstance(obj, dict) or not isinstance(obj.get("acronym"), str):
            raise ParseError(f"session entry {i} lacks a string 'acronym'", url)
        drafts = obj.get("drafts") or []
        if not isinstance(drafts, list) or not all(isinstance(d, str) for d in drafts):
            raise ParseError(f"session entry {i}: 'drafts' must be an array of strings", url)
        entries.append(obj)

    def fetch_text(ref: object) -> str:
        if not ref:
            return ""
        if not isinstance(ref, str):
            raise ParseError(f"document reference must be a string, got {ref!r}", url)
        doc_url = urljoin(base, ref)
        doc = _api_get(transport, doc_url, cfg, sleep)
        if doc.status == 404:
            logger.warning("document %s missing (404); treating as empty", doc_url)
            return ""
        if not doc.ok:
            raise NetworkError(f"GET {doc_url} returned HTTP {doc.status}")
        return doc.text

    def build(indexed: tuple[int, dict]) -> tuple[str, int, RawSession]:
        i, obj = indexed
        acronym = obj["acronym"].strip().lower()
        agenda = fetch_text(obj.get("agenda_url"))
        minutes = fetch_text(obj.get("minutes_url"))
        drafts = dict.fromkeys(normalize_draft_list(obj.get("drafts") or []))
        drafts.update(dict.fromkeys(extract_draft_names(agenda + "\n" + minutes)))
        name = obj.get("name") if isinstance(obj.get("name"), str) else acronym
        session = RawSession(acronym, name, cfg.meeting_number, agenda, minutes, tuple(drafts))
        return acronym, i, session

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        built = list(pool.map(build, enumerate(entries)))
    built.sort(key=lambda t: (t[0], t[1]))
    return [s for _, _, s in built]


# --- attendance -------------------------------------------------------------


def parse_attendance_csv(
    data: str, session: str | None, path: str = "<memory>"
) -> tuple[list[RawAttendanceRow], int]:
    """Parse one attendance CSV. Returns ``(rows, skipped)``.

    Rows whose name is blank after trimming are skipped and counted.
    """
    reader = csv.reader(io.StringIO(data, newline=""), strict=True)
    rows: list[RawAttendanceRow] = []
    skipped = 0
    try:
        header = next(reader, None)
        if header is None:
            return rows, 0
        if [h.strip() for h in header] != ATTENDANCE_HEADER:
            raise ParseError(f"header must be exactly 'name,affiliation', got {','.join(header)!r}", path, 1)
        for record in reader:
            if len(record) > 2:
                raise ParseError(f"expected 2 fields, got {len(record)}", path, reader.line_num)
            name = record[0].strip() if record else ""
            if not name:
                skipped += 1
                continue
            affiliation = record[1].strip() if len(record) > 1 else ""
            rows.append(RawAttendanceRow(name, affiliation, session))
    except csv.Error as exc:
        raise ParseError(f"bad CSV: {exc}", path, reader.line_num) from exc
    return rows, skipped


def load_attendance(cfg: SourceConfig) -> tuple[list[RawAttendanceRow], int]:
    """All attendance rows under the mirror plus the number of skipped lines.

    Meeting-wide registrations come first, then each working group's
    sign-ins in acronym order; rows keep file order.
    """
    if cfg.mirror_root is None:
        return [], 0
    rows: list[RawAttendanceRow] = []
    skipped = 0
    sources: list[tuple[Path, str | None]] = [(cfg.meeting_dir / "registrants.csv", None)]
    sources += [(d / "attendees.csv", d.name) for d in _session_dirs(cfg)]
    for path, scope in sources:
        if not path.is_file():
            continue
        got, n = parse_attendance_csv(decode(path.read_bytes()), scope, str(path))
        rows.extend(got)
        skipped += n
    if skipped:
        logger.info("skipped %d attendance rows with empty names", skipped)
    return rows, skipped
