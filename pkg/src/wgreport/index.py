"""Budgeted chunking of session documents and lexical TF-IDF retrieval.

This is a deliberately simple stand-in for a vector store: scores are
cosine similarities of TF-IDF vectors over normalized tokens, so results are
deterministic and need no model.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Literal

from .corpus import Corpus, dumps
from .errors import InvalidBudget, IoError, SchemaError
from .resolve import normalize_text

DocKind = Literal["minutes", "agenda"]

# Rough scalars-per-token estimate; swap for a real tokenizer if one is wired in.
CHARS_PER_TOKEN = 4
DEFAULT_BUDGET = 3000
DEFAULT_OVERLAP = 200
SCHEMA_VERSION = 1
INDEX_FILE = "index.json"

_PARAGRAPH_RE = re.compile(r"\n[ \t\r\f\v]*\n\s*")
_SENTENCE_RE = re.compile(r"[.!?][\"')\]]*\s+")


def est_tokens(text: str) -> int:
    return -(-len(text) // CHARS_PER_TOKEN)


@dataclass(frozen=True)
class Chunk:
    wg_acronym: str
    doc_kind: DocKind
    seq: int
    text: str
    est_tokens: int
    # Leading scalars repeated from the previous chunk (non-zero only after a hard cut).
    overlap: int = 0

    @property
    def fresh_text(self) -> str:
        return self.text[self.overlap:]


def _last_cut(pattern: re.Pattern[str], text: str, lo: int, hi: int) -> int | None:
    best = None
    for m in pattern.finditer(text, lo, hi):
        if lo < m.end() <= hi:
            best = m.end()
    return best


def chunk_document(
    text: str,
    budget_tokens: int = DEFAULT_BUDGET,
    overlap_tokens: int = DEFAULT_OVERLAP,
    *,
    wg_acronym: str = "",
    doc_kind: DocKind = "minutes",
) -> list[Chunk]:
    """Split ``text`` into chunks of at most ``budget_tokens`` estimated tokens.

    Cuts go after the last blank line that fits, else after the last sentence
    end, else at the budget itself; only that last kind of cut carries an
    overlap into the next chunk. ``"".join(c.fresh_text for c in chunks)``
    gives back ``text``.
    """
    if not (isinstance(budget_tokens, int) and isinstance(overlap_tokens, int)):
        raise InvalidBudget("budget and overlap must be integers")
    if not budget_tokens > overlap_tokens >= 0:
        raise InvalidBudget(f"need budget > overlap >= 0, got budget={budget_tokens} overlap={overlap_tokens}")
    limit = budget_tokens * CHARS_PER_TOKEN
    carry = overlap_tokens * CHARS_PER_TOKEN

    chunks: list[Chunk] = []
    pos, overlap = 0, 0
    while pos < len(text):
        if len(text) - pos <= limit:
            cut, next_pos, next_overlap = len(text), len(text), 0
        else:
            hi = pos + limit
            lo = pos + overlap
            cut = _last_cut(_PARAGRAPH_RE, text, lo, hi) or _last_cut(_SENTENCE_RE, text, lo, hi)
            if cut is not None:
                next_pos, next_overlap = cut, 0
            else:
                cut = hi
                next_overlap = carry
                next_pos = cut - carry
        piece = text[pos:cut]
        chunks.append(Chunk(wg_acronym, doc_kind, len(chunks), piece, est_tokens(piece), overlap))
        pos, overlap = next_pos, next_overlap
    return chunks


def tokenize(text: str) -> list[str]:
    return normalize_text(text).split()


@dataclass(frozen=True)
class RetrievalIndex:
    chunks: tuple[Chunk, ...] = ()
    df: dict[str, int] = field(default_factory=dict)
    budget_tokens: int = DEFAULT_BUDGET
    overlap_tokens: int = DEFAULT_OVERLAP

    @property
    def n(self) -> int:
        return len(self.chunks)

    def idf(self, term: str) -> float:
        return math.log(1 + self.n / (1 + self.df.get(term, 0)))

    @cached_property
    def term_counts(self) -> tuple[Counter[str], ...]:
        return tuple(Counter(tokenize(c.text)) for c in self.chunks)

    def for_wg(self, wg: str, doc_kind: DocKind | None = None) -> list[Chunk]:
        return [c for c in self.chunks if c.wg_acronym == wg and (doc_kind is None or c.doc_kind == doc_kind)]


def _sort_key(c: Chunk) -> tuple[str, str, int]:
    return (c.wg_acronym, c.doc_kind, c.seq)


def build_index(
    chunks: Iterable[Chunk],
    budget_tokens: int = DEFAULT_BUDGET,
    overlap_tokens: int = DEFAULT_OVERLAP,
) -> RetrievalIndex:
    ordered = tuple(sorted(chunks, key=_sort_key))
    df: Counter[str] = Counter()
    for c in ordered:
        df.update(set(tokenize(c.text)))
    return RetrievalIndex(ordered, dict(sorted(df.items())), budget_tokens, overlap_tokens)


def index_corpus(
    corpus: Corpus,
    budget_tokens: int = DEFAULT_BUDGET,
    overlap_tokens: int = DEFAULT_OVERLAP,
) -> RetrievalIndex:
    chunks: list[Chunk] = []
    for wg, rec in sorted(corpus.sessions.items()):
        chunks += chunk_document(rec.agenda_text, budget_tokens, overlap_tokens, wg_acronym=wg, doc_kind="agenda")
        chunks += chunk_document(rec.minutes_text, budget_tokens, overlap_tokens, wg_acronym=wg, doc_kind="minutes")
    return build_index(chunks, budget_tokens, overlap_tokens)


def _weights(index: RetrievalIndex, counts: Counter[str]) -> dict[str, float]:
    return {t: n * index.idf(t) for t, n in counts.items()}


def _norm(vec: dict[str, float]) -> float:
    return math.sqrt(sum(w * w for w in vec.values()))


def score(
    index: RetrievalIndex,
    query: str,
    k: int,
    *,
    wg_acronym: str | None = None,
) -> list[tuple[Chunk, float]]:
    """Top-``k`` chunks by TF-IDF cosine similarity to ``query``.

    Ties (including all-zero scores) fall back to (wg, doc_kind, seq) order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _weights(index, Counter(tokenize(query)))
    q_norm = _norm(q)
    scored = []
    for c, counts in zip(index.chunks, index.term_counts):
        if wg_acronym is not None and c.wg_acronym != wg_acronym:
            continue
        vec = _weights(index, counts)
        denom = q_norm * _norm(vec)
        dot = sum(w * vec.get(t, 0.0) for t, w in q.items())
        scored.append((c, dot / denom if denom else 0.0))
    scored.sort(key=lambda cs: (-cs[1], _sort_key(cs[0])))
    return scored[:k]


# --- persistence ------------------------------------------------------------


def index_to_dict(index: RetrievalIndex) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "budget_tokens": index.budget_tokens,
        "overlap_tokens": index.overlap_tokens,
        "n": index.n,
        "df": index.df,
        "chunks": [
            {
                "wg_acronym": c.wg_acronym,
                "doc_kind": c.doc_kind,
                "seq": c.seq,
                "text": c.text,
                "est_tokens": c.est_tokens,
                "overlap": c.overlap,
            }
            for c in index.chunks
        ],
    }


def index_from_dict(data: Any) -> RetrievalIndex:
    if not isinstance(data, dict) or data.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported index schema {getattr(data, 'get', lambda _: None)('schema')!r}")
    try:
        chunks = tuple(
            Chunk(c["wg_acronym"], c["doc_kind"], int(c["seq"]), c["text"], int(c["est_tokens"]), int(c["overlap"]))
            for c in data["chunks"]
        )
        df = {str(t): int(n) for t, n in data["df"].items()}
        return RetrievalIndex(chunks, df, int(data["budget_tokens"]), int(data["overlap_tokens"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed index document: {exc!r}") from exc


def save_index(index: RetrievalIndex, directory: Path | str) -> Path:
    path = Path(directory) / INDEX_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(index_to_dict(index)), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def load_index(directory: Path | str) -> RetrievalIndex:
    path = Path(directory) / INDEX_FILE
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    return index_from_dict(data)
