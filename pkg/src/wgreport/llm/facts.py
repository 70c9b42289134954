"""Ground-truth facts handed to the model, and the FACTS block codec."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from typing import Any

from ..corpus import Corpus
from ..errors import FormatError
from ..ingest import extract_draft_names

FACTS_OPEN = "<<FACTS>>"
FACTS_CLOSE = "<<END>>"

_ITEM_RE = re.compile(r"^(?:[-*+]|\d+[.)])\s+(.*\S)\s*$")
_TIME_RE = re.compile(r"\[?\b\d{1,2}:\d{2}\b\]?|\(?\b\d+\s*(?:min|mins|minutes)\b\)?", re.IGNORECASE)
_PAREN_TAIL_RE = re.compile(r"\(([^()]*)\)\s*$")
_DASH_SPLIT_RE = re.compile(r"\s+[–—]\s+")
_DRAFT_TOKEN_RE = re.compile(r"(?<![a-z0-9.-])draft-[a-z0-9.-]*[a-z0-9]")
_EDGE_PUNCT_RE = re.compile(r"^[\s,;:–—-]+|[\s,;:–—-]+$")
_NAME_SPLIT_RE = re.compile(r"\s*(?:,|/|&|\band\b)\s*")


@dataclass(frozen=True)
class AgendaTopic:
    title: str
    presenters: tuple[str, ...] = ()
    drafts: tuple[str, ...] = ()


def _strip_drafts(text: str) -> str:
    text = _DRAFT_TOKEN_RE.sub(" ", text)
    text = _EDGE_PUNCT_RE.sub("", text)
    return " ".join(text.split())


def _looks_like_names(text: str) -> bool:
    return bool(text) and "draft-" not in text and not any(ch.isdigit() for ch in text)


def parse_agenda(text: str) -> list[AgendaTopic]:
    """Top-level list items of an agenda, in order.

    ``Title (Presenter)`` and ``Title — Presenter`` are split into title and
    presenters; time annotations such as ``10 min`` or ``[14:05]`` are dropped.
    Indented sub-items are ignored.
    """
    topics = []
    for line in text.splitlines():
        if line[:1].isspace():
            continue
        m = _ITEM_RE.match(line)
        if not m:
            continue
        item = m.group(1)
        drafts = tuple(extract_draft_names(item))
        item = " ".join(_TIME_RE.sub(" ", item).split())
        presenters: tuple[str, ...] = ()
        paren = _PAREN_TAIL_RE.search(item)
        if paren and _looks_like_names(paren.group(1).strip()):
            presenters = tuple(p for p in _NAME_SPLIT_RE.split(paren.group(1).strip()) if p)
            item = item[: paren.start()].strip()
        else:
            parts = _DASH_SPLIT_RE.split(item)
            if len(parts) > 1 and _looks_like_names(parts[-1]):
                presenters = tuple(p for p in _NAME_SPLIT_RE.split(parts[-1]) if p)
                item = " — ".join(parts[:-1]).strip()
        title = _strip_drafts(item) or item
        if title:
            topics.append(AgendaTopic(title, presenters, drafts))
    return topics


@dataclass(frozen=True)
class WgFacts:
    wg_acronym: str
    wg_name: str
    meeting_number: int
    attendee_count: int
    top_affiliations: tuple[tuple[str, int], ...]
    draft_names: tuple[str, ...]
    agenda_topics: tuple[AgendaTopic, ...]
    discussion_chunks: int = 0

    def to_json(self) -> str:
        text = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        # Angle brackets only occur inside strings; escaping them keeps the delimiters unambiguous.
        return text.replace("<", "\\u003c").replace(">", "\\u003e")


def build_facts(corpus: Corpus, wg: str, discussion_chunks: int = 0) -> WgFacts:
    rec = corpus.session(wg)
    return WgFacts(
        wg_acronym=rec.wg_acronym,
        wg_name=rec.wg_name,
        meeting_number=corpus.meeting_number,
        attendee_count=rec.attendee_count,
        top_affiliations=rec.top_affiliations,
        draft_names=rec.draft_names,
        agenda_topics=tuple(parse_agenda(rec.agenda_text)),
        discussion_chunks=discussion_chunks,
    )


def facts_block(facts: WgFacts) -> str:
    return f"{FACTS_OPEN}\n{facts.to_json()}\n{FACTS_CLOSE}"


def extract_facts(prompt: str) -> dict[str, Any]:
    """Decode the first FACTS block in ``prompt``."""
    start = prompt.find(FACTS_OPEN)
    if start < 0:
        raise FormatError("prompt carries no FACTS block")
    start += len(FACTS_OPEN)
    end = prompt.find(FACTS_CLOSE, start)
    if end < 0:
        raise FormatError("unterminated FACTS block")
    try:
        data = json.loads(prompt[start:end])
    except json.JSONDecodeError as exc:
        raise FormatError(f"FACTS block is not JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError("FACTS block must hold a JSON object")
    return data
