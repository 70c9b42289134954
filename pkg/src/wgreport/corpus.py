"""The consolidated meeting record and its ``corpus.json`` store."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .errors import ConsistencyError, IoError, SchemaError
from .ingest import RawSession, extract_draft_names
from .resolve import AttendanceLedger, CanonicalEntity

SCHEMA_VERSION = 1
CORPUS_FILE = "corpus.json"


@dataclass(frozen=True)
class SessionRecord:
    wg_acronym: str
    wg_name: str
    minutes_text: str = ""
    agenda_text: str = ""
    draft_names: tuple[str, ...] = ()
    attendee_count: int = 0
    top_affiliations: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class Corpus:
    meeting_number: int
    created_at: datetime
    sessions: dict[str, SessionRecord] = field(default_factory=dict)
    entities: tuple[CanonicalEntity, ...] = ()
    ledger: AttendanceLedger = field(default_factory=AttendanceLedger)

    def session(self, wg: str) -> SessionRecord:
        try:
            return self.sessions[wg]
        except KeyError:
            raise ConsistencyError(f"working group {wg!r} is not in the corpus") from None


def _merge(group: list[RawSession]) -> tuple[str, str, tuple[str, ...]]:
    agenda = "\n\n".join(s.agenda_text for s in group if s.agenda_text)
    minutes = "\n\n".join(s.minutes_text for s in group if s.minutes_text)
    drafts: dict[str, None] = {}
    for s in group:
        drafts.update(dict.fromkeys(s.draft_names))
    drafts.update(dict.fromkeys(extract_draft_names(agenda + "\n" + minutes)))
    return agenda, minutes, tuple(drafts)


def build_corpus(
    sessions: list[RawSession],
    ledger: AttendanceLedger,
    entities: list[CanonicalEntity] | tuple[CanonicalEntity, ...],
    *,
    meeting_number: int,
    created_at: datetime,
) -> Corpus:
    """Merge raw sessions with resolved attendance into one Corpus.

    Several sessions of the same working group collapse into one record.
    """
    if meeting_number <= 0:
        raise ConsistencyError("meeting_number must be positive")
    for s in sessions:
        if s.meeting_number != meeting_number:
            raise ConsistencyError(
                f"session {s.wg_acronym} belongs to meeting {s.meeting_number}, not {meeting_number}"
            )
    grouped: dict[str, list[RawSession]] = {}
    for s in sessions:
        grouped.setdefault(s.wg_acronym, []).append(s)
    stray = sorted(set(ledger.session_people) - set(grouped))
    if stray:
        raise ConsistencyError(f"attendance references sessions absent from the meeting: {', '.join(stray)}")

    records = {}
    for wg in sorted(grouped):
        agenda, minutes, drafts = _merge(grouped[wg])
        records[wg] = SessionRecord(
            wg_acronym=wg,
            wg_name=grouped[wg][0].wg_name,
            minutes_text=minutes,
            agenda_text=agenda,
            draft_names=drafts,
            attendee_count=ledger.session_count(wg),
            top_affiliations=ledger.top_affiliations(wg),
        )
    if created_at.tzinfo is None:
        created_at = created_at.replace(tzinfo=timezone.utc)
    return Corpus(
        meeting_number=meeting_number,
        created_at=created_at.astimezone(timezone.utc),
        sessions=records,
        entities=tuple(entities),
        ledger=ledger,
    )


# --- serialization ----------------------------------------------------------


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def dumps(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def corpus_to_dict(corpus: Corpus) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "meeting_number": corpus.meeting_number,
        "created_at": format_timestamp(corpus.created_at),
        "sessions": {
            wg: {
                "wg_acronym": r.wg_acronym,
                "wg_name": r.wg_name,
                "minutes_text": r.minutes_text,
                "agenda_text": r.agenda_text,
                "draft_names": list(r.draft_names),
                "attendee_count": r.attendee_count,
                "top_affiliations": [[label, n] for label, n in r.top_affiliations],
            }
            for wg, r in corpus.sessions.items()
        },
        "entities": [
            {
                "id": e.id,
                "kind": e.kind,
                "label": e.label,
                "surface_forms": sorted(e.surface_forms),
                "normalized_forms": sorted(e.normalized_forms),
                "frequency": e.frequency,
            }
            for e in corpus.entities
        ],
        "ledger": {
            "meeting_people": list(corpus.ledger.meeting_people),
            "session_people": {wg: list(p) for wg, p in corpus.ledger.session_people.items()},
            "session_affiliations": {
                wg: [[label, n] for label, n in ranked]
                for wg, ranked in corpus.ledger.session_affiliations.items()
            },
        },
    }


def corpus_from_dict(data: Any) -> Corpus:
    if not isinstance(data, dict):
        raise SchemaError("corpus document must be a JSON object")
    if data.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported corpus schema {data.get('schema')!r} (expected {SCHEMA_VERSION})")
    try:
        sessions = {
            wg: SessionRecord(
                wg_acronym=r["wg_acronym"],
                wg_name=r["wg_name"],
                minutes_text=r["minutes_text"],
                agenda_text=r["agenda_text"],
                draft_names=tuple(r["draft_names"]),
                attendee_count=int(r["attendee_count"]),
                top_affiliations=tuple((label, int(n)) for label, n in r["top_affiliations"]),
            )
            for wg, r in data["sessions"].items()
        }
        entities = tuple(
            CanonicalEntity(
                id=e["id"],
                kind=e["kind"],
                label=e["label"],
                surface_forms=frozenset(e["surface_forms"]),
                frequency=int(e["frequency"]),
                normalized_forms=frozenset(e["normalized_forms"]),
            )
            for e in data["entities"]
        )
        led = data["ledger"]
        ledger = AttendanceLedger(
            meeting_people=tuple(led["meeting_people"]),
            session_people={wg: tuple(p) for wg, p in led["session_people"].items()},
            session_affiliations={
                wg: tuple((label, int(n)) for label, n in ranked)
                for wg, ranked in led["session_affiliations"].items()
            },
        )
        return Corpus(
            meeting_number=int(data["meeting_number"]),
            created_at=parse_timestamp(data["created_at"]),
            sessions=dict(sorted(sessions.items())),
            entities=entities,
            ledger=ledger,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed corpus document: {exc!r}") from exc


def save(corpus: Corpus, directory: Path | str) -> Path:
    path = Path(directory) / CORPUS_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(corpus_to_dict(corpus)), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def load(directory: Path | str) -> Corpus:
    path = Path(directory) / CORPUS_FILE
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    return corpus_from_dict(data)
