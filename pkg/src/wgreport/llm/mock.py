"""Deterministic offline backend.

The reply is a pure function of the prompt's FACTS block: the structured
summary schema filled with fact values only (counts, affiliation labels,
topic titles, presenters, draft names) and no generated prose.
"""

from __future__ import annotations

import json

from .backends import Backend, CompletionRequest
from .facts import extract_facts

MOCK_OVERVIEW_AFFILIATIONS = 5


def mock_complete(request: CompletionRequest) -> str:
    facts = extract_facts(request.user_prompt)
    count = int(facts.get("attendee_count", 0))
    labels = [label for label, _ in facts.get("top_affiliations", [])][:MOCK_OVERVIEW_AFFILIATIONS]
    overview = f"{count} participants"
    if labels:
        overview += "; " + ", ".join(labels)
    topics = []
    if int(facts.get("discussion_chunks", 0)) > 0:
        for t in facts.get("agenda_topics", []):
            topics.append(
                {
                    "title": t["title"],
                    "body": "",
                    "presenters": list(t.get("presenters", [])),
                    "drafts": list(t.get("drafts", [])),
                }
            )
    return json.dumps({"overview": overview, "topics": topics}, sort_keys=True, ensure_ascii=False)


class MockBackend(Backend):
    name = "mock"
    context_tokens = 1_000_000

    def __init__(self) -> None:
        super().__init__()
        self.calls = 0

    def send(self, request: CompletionRequest) -> str:
        self.calls += 1
        return mock_complete(request)
