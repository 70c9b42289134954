"""Completion backends, the model registry and the per-WG summarizer."""

from .backends import (
    ApiBackend,
    Backend,
    BackendPolicy,
    BackendStatus,
    CompletionRequest,
    LocalBackend,
    TokenBucket,
    complete,
)
from .facts import AgendaTopic, WgFacts, build_facts, parse_agenda
from .mock import MockBackend, mock_complete
from .registry import ModelSpec, classify_model, load_registry
from .summarize import PromptTemplate, TopicSection, WgSummary, check_grounding, parse_summary, summarize_wg

__all__ = [
    "AgendaTopic",
    "ApiBackend",
    "Backend",
    "BackendPolicy",
    "BackendStatus",
    "CompletionRequest",
    "LocalBackend",
    "MockBackend",
    "ModelSpec",
    "PromptTemplate",
    "TokenBucket",
    "TopicSection",
    "WgFacts",
    "WgSummary",
    "build_facts",
    "check_grounding",
    "classify_model",
    "complete",
    "load_registry",
    "mock_complete",
    "parse_agenda",
    "parse_summary",
    "summarize_wg",
]
