"""Per-working-group map-reduce summarization with grounding checks.

Map: each minutes chunk is folded into a running summary, so context
carries across chunk boundaries. Reduce: one request combines the FACTS
block, every intermediate summary and per-agenda-item excerpts into the
structured reply, which is parsed and checked against the corpus.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import Any, Callable

from ..corpus import Corpus
from ..errors import FormatError, GroundingError
from ..index import RetrievalIndex, score
from ..ingest import DRAFT_RE, extract_draft_names
from .backends import Backend, BackendPolicy, CompletionRequest, complete
from .facts import WgFacts, build_facts, facts_block

logger = logging.getLogger(__name__)

MAP_OUTPUT_TOKENS = 512
REDUCE_OUTPUT_TOKENS = 2048
EXCERPT_CHARS = 600
EXCERPTS_PER_TOPIC = 1


@dataclass(frozen=True)
class PromptTemplate:
    system: str
    map: str
    reduce: str
    repair: str

    @classmethod
    def default(cls) -> "PromptTemplate":
        root = resources.files("wgreport").joinpath("templates")
        read = lambda name: root.joinpath(name).read_text(encoding="utf-8")  # noqa: E731
        return cls(read("system.txt"), read("map.txt"), read("reduce.txt"), read("repair.txt"))


@dataclass(frozen=True)
class TopicSection:
    title: str
    body: str = ""
    presenters: tuple[str, ...] = ()
    draft_links: tuple[str, ...] = ()


@dataclass(frozen=True)
class WgSummary:
    wg_acronym: str
    overview: str
    topics: tuple[TopicSection, ...] = ()

    def draft_links(self) -> list[str]:
        seen: dict[str, None] = {}
        for text in [self.overview, *(t.title for t in self.topics), *(t.body for t in self.topics)]:
            seen.update(dict.fromkeys(extract_draft_names(text)))
        for t in self.topics:
            seen.update(dict.fromkeys(t.draft_links))
        return list(seen)


# --- reply parsing ----------------------------------------------------------

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$")


def _str_list(value: Any, what: str) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise FormatError(f"{what} must be a list of strings")
    return tuple(v.strip() for v in value if v.strip())


def _canonical_draft(raw: str) -> str:
    names = extract_draft_names(raw.strip().lower())
    if len(names) == 1:
        return names[0]
    # Not a recognisable draft name; keep it verbatim so grounding rejects it.
    return raw.strip()


def parse_summary(reply: str, wg_acronym: str) -> WgSummary:
    text = _FENCE_RE.sub("", reply.strip())
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < start:
        raise FormatError("reply holds no JSON object")
    try:
        data = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise FormatError(f"reply is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise FormatError("reply must be a JSON object")
    overview = data.get("overview")
    if not isinstance(overview, str):
        raise FormatError("'overview' must be a string")
    raw_topics = data.get("topics", [])
    if not isinstance(raw_topics, list):
        raise FormatError("'topics' must be a list")
    topics = []
    for i, t in enumerate(raw_topics):
        if not isinstance(t, dict) or not isinstance(t.get("title"), str):
            raise FormatError(f"topic {i} needs a string 'title'")
        body = t.get("body", "")
        if not isinstance(body, str):
            raise FormatError(f"topic {i}: 'body' must be a string")
        drafts = dict.fromkeys(_canonical_draft(d) for d in _str_list(t.get("drafts"), f"topic {i} drafts"))
        topics.append(
            TopicSection(
                title=t["title"].strip(),
                body=body.strip(),
                presenters=_str_list(t.get("presenters"), f"topic {i} presenters"),
                draft_links=tuple(drafts),
            )
        )
    return WgSummary(wg_acronym, overview.strip(), tuple(topics))


def check_grounding(summary: WgSummary, known_drafts: tuple[str, ...] | list[str]) -> None:
    known = set(known_drafts)
    unknown = [d for d in summary.draft_links() if d not in known or not DRAFT_RE.fullmatch(d)]
    if unknown:
        raise GroundingError(
            f"{summary.wg_acronym}: reply cites drafts absent from the corpus: {', '.join(unknown)}",
            unknown,
        )


# --- the summarizer ---------------------------------------------------------


def _fit(request_for: Callable[[bool], CompletionRequest], backend: Backend) -> CompletionRequest:
    request = request_for(True)
    if request.prompt_tokens + request.max_output_tokens > backend.context_tokens:
        request = request_for(False)
    return request


def summarize_wg(
    corpus: Corpus,
    index: RetrievalIndex,
    wg_acronym: str,
    backend: Backend,
    template: PromptTemplate | None = None,
    policy: BackendPolicy | None = None,
    *,
    temperature: float = 0.0,
    sleep: Callable[[float], None] = time.sleep,
) -> WgSummary:
    """Summarize one working group's session into a grounded WgSummary."""
    template = template or PromptTemplate.default()
    corpus.session(wg_acronym)
    chunks = sorted(index.for_wg(wg_acronym, "minutes"), key=lambda c: c.seq)
    facts = build_facts(corpus, wg_acronym, discussion_chunks=len(chunks))
    block = facts_block(facts)
    common = {
        "facts": block,
        "wg_name": facts.wg_name,
        "wg_acronym": facts.wg_acronym,
        "meeting": facts.meeting_number,
    }

    def call(request: CompletionRequest) -> str:
        return complete(backend, request, policy, sleep=sleep)

    summaries: list[str] = []
    running = "(nothing yet)"
    for i, chunk in enumerate(chunks, 1):
        prompt = Template(template.map).safe_substitute(
            common,
            part=i,
            parts=len(chunks),
            previous=i - 1,
            running=running,
            chunk=chunk.text,
            max_words=MAP_OUTPUT_TOKENS * 3 // 4,
        )
        running = call(CompletionRequest(template.system, prompt, MAP_OUTPUT_TOKENS, temperature)).strip()
        summaries.append(running)

    excerpts = _topic_excerpts(index, facts) if chunks else ""

    def reduce_request(full: bool) -> CompletionRequest:
        kept = summaries if full else summaries[-1:]
        prompt = Template(template.reduce).safe_substitute(
            common,
            summaries="\n\n".join(f"[{n}] {s}" for n, s in enumerate(kept, 1)) or "(no minutes were recorded)",
            excerpts=(excerpts if full else "") or "(none)",
            attendee_count=facts.attendee_count,
            topics_rule=(
                "" if chunks else '- No minutes exist for this session: return "topics": [] and an overview only.'
            ),
        )
        return CompletionRequest(template.system, prompt, REDUCE_OUTPUT_TOKENS, temperature)

    request = _fit(reduce_request, backend)
    reply = call(request)
    try:
        summary = parse_summary(reply, wg_acronym)
    except FormatError as exc:
        logger.warning("%s: malformed reply (%s); asking once for a repair", wg_acronym, exc)
        repair = Template(template.repair).safe_substitute(error=str(exc))
        retry = CompletionRequest(request.system_prompt, request.user_prompt + repair, REDUCE_OUTPUT_TOKENS, temperature)
        summary = parse_summary(call(retry), wg_acronym)

    # Grounding is judged on the reply as sent, before anything is dropped.
    check_grounding(summary, facts.draft_names)
    if not chunks:
        summary = WgSummary(summary.wg_acronym, summary.overview, ())
    return summary


def _topic_excerpts(index: RetrievalIndex, facts: WgFacts) -> str:
    lines = []
    for n, topic in enumerate(facts.agenda_topics, 1):
        hits = score(index, " ".join([topic.title, *topic.drafts]), EXCERPTS_PER_TOPIC, wg_acronym=facts.wg_acronym)
        for chunk, value in hits:
            if value <= 0 or chunk.doc_kind != "minutes":
                continue
            snippet = " ".join(chunk.text.split())[:EXCERPT_CHARS]
            lines.append(f"({n}) {topic.title}: {snippet}")
    return "\n".join(lines)
