"""Name and affiliation normalization, fuzzy scores, and greedy clustering."""

from __future__ import annotations

import hashlib
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Literal

from .errors import InvalidThreshold
from .ingest import RawAttendanceRow

Kind = Literal["person", "affiliation"]
Method = Literal["lev_ratio", "token_sort", "token_set"]

AFFILIATION_THRESHOLD = 85.0
PERSON_THRESHOLD = 92.0
UNAFFILIATED = "unaffiliated"
UNAFFILIATED_ID = "affiliation:unaffiliated"


@dataclass(frozen=True)
class NormalizedString:
    original: str
    normalized: str


@dataclass(frozen=True)
class MatchScore:
    value: float
    method: Method

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"score out of range: {self.value}")


@dataclass(frozen=True)
class CanonicalEntity:
    id: str
    kind: Kind
    label: str
    surface_forms: frozenset[str]
    frequency: int
    # Normalized forms merged into this entity; partitions the clustered input.
    normalized_forms: frozenset[str] = field(default_factory=frozenset)


# --- normalization ----------------------------------------------------------


def _fold_once(s: str) -> str:
    s = unicodedata.normalize("NFKC", s).lower()
    s = unicodedata.normalize("NFKC", s)
    chars = [" " if unicodedata.category(c).startswith("P") else c for c in s]
    return " ".join("".join(chars).split())


def normalize_text(s: str) -> str:
    out = _fold_once(s)
    # A handful of code points only settle after a second NFKC/lower round.
    for _ in range(4):
        again = _fold_once(out)
        if again == out:
            break
        out = again
    return out


def normalize(s: str) -> NormalizedString:
    return NormalizedString(s, normalize_text(s))


# --- scores -----------------------------------------------------------------


def levenshtein(a: str, b: str, max_dist: int | None = None) -> int:
    """Unit-cost edit distance over code points.

    With ``max_dist`` set, returns ``max_dist + 1`` as soon as the distance is
    known to exceed it.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if max_dist is not None and len(a) - len(b) > max_dist:
        return max_dist + 1
    cap = (lambda d: d) if max_dist is None else (lambda d: min(d, max_dist + 1))
    if not b:
        return cap(len(a))
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        if max_dist is not None and min(cur) > max_dist:
            return max_dist + 1
        prev = cur
    return cap(prev[-1])


def _ratio_from_distance(dist: int, longest: int) -> float:
    if longest == 0:
        return 100.0
    # 100 * (1 - d/m) in hundredths, rounded half-up, in exact integer arithmetic.
    hundredths = (20000 * (longest - dist) + longest) // (2 * longest)
    return hundredths / 100


def lev_ratio(a: str, b: str) -> MatchScore:
    longest = max(len(a), len(b))
    return MatchScore(_ratio_from_distance(levenshtein(a, b), longest), "lev_ratio")


def _sorted_tokens(s: str) -> str:
    return " ".join(sorted(s.split()))


def token_sort_ratio(a: str, b: str) -> MatchScore:
    return MatchScore(lev_ratio(_sorted_tokens(a), _sorted_tokens(b)).value, "token_sort")


def _token_set_strings(a: str, b: str) -> tuple[str, str, str]:
    ta, tb = set(a.split()), set(b.split())
    t0 = " ".join(sorted(ta & tb))
    t1 = " ".join(filter(None, [t0, " ".join(sorted(ta - tb))]))
    t2 = " ".join(filter(None, [t0, " ".join(sorted(tb - ta))]))
    return t0, t1, t2


def token_set_ratio(a: str, b: str) -> MatchScore:
    ta, tb = a.split(), b.split()
    if not ta and not tb:
        return MatchScore(100.0, "token_set")
    if not ta or not tb:
        return MatchScore(0.0, "token_set")
    t0, t1, t2 = _token_set_strings(a, b)
    best = max(lev_ratio(t0, t1).value, lev_ratio(t0, t2).value, lev_ratio(t1, t2).value)
    return MatchScore(best, "token_set")


def _reaches(a: str, b: str, threshold: float) -> bool:
    """lev_ratio(a, b) >= threshold, bailing out of hopeless comparisons early."""
    longest = max(len(a), len(b))
    if longest == 0:
        return True
    # Any distance above this cap rounds to a ratio strictly below threshold.
    cap = int(longest * (100.0 - threshold) / 100.0) + 1
    dist = levenshtein(a, b, cap)
    return dist <= cap and _ratio_from_distance(dist, longest) >= threshold


def _matches(kind: Kind, candidate: str, label: str, threshold: float) -> bool:
    if kind == "person":
        return _reaches(_sorted_tokens(candidate), _sorted_tokens(label), threshold)
    if not candidate.split() or not label.split():
        return token_set_ratio(candidate, label).value >= threshold
    t0, t1, t2 = _token_set_strings(candidate, label)
    return _reaches(t0, t1, threshold) or _reaches(t0, t2, threshold) or _reaches(t1, t2, threshold)


# --- clustering -------------------------------------------------------------


def _entity_id(kind: Kind, normalized: str) -> str:
    digest = hashlib.sha1(normalized.encode("utf-8")).hexdigest()[:12]
    return f"{kind}:{digest}"


def cluster(rows: Iterable[NormalizedString], kind: Kind, threshold: float) -> list[CanonicalEntity]:
    """Greedy frequency-first clustering of normalized strings.

    Distinct forms are visited by descending frequency (ties: ascending
    form). Each joins the first existing entity whose label scores at least
    ``threshold`` against it, otherwise founds a new one labelled with its
    most frequent original spelling.
    """
    if not 0 < threshold <= 100:
        raise InvalidThreshold(f"threshold must lie in (0, 100], got {threshold}")
    freq: Counter[str] = Counter()
    originals: dict[str, Counter[str]] = defaultdict(Counter)
    for row in rows:
        freq[row.normalized] += 1
        originals[row.normalized][row.original] += 1

    order = sorted(freq, key=lambda form: (-freq[form], form))
    founders: list[str] = []
    members: dict[str, list[str]] = {}
    for form in order:
        for label in founders:
            if _matches(kind, form, label, threshold):
                members[label].append(form)
                break
        else:
            founders.append(form)
            members[form] = [form]

    entities = []
    for founder in founders:
        spellings = originals[founder]
        label = min(spellings, key=lambda s: (-spellings[s], s))
        forms = members[founder]
        surface = frozenset(s for f in forms for s in originals[f])
        entities.append(
            CanonicalEntity(
                id=_entity_id(kind, founder),
                kind=kind,
                label=label,
                surface_forms=surface,
                frequency=sum(freq[f] for f in forms),
                normalized_forms=frozenset(forms),
            )
        )
    return entities


# --- attendance ledger ------------------------------------------------------


@dataclass(frozen=True)
class AttendanceLedger:
    """Unique-person ids per scope and per-session affiliation rankings."""

    meeting_people: tuple[str, ...] = ()
    session_people: dict[str, tuple[str, ...]] = field(default_factory=dict)
    session_affiliations: dict[str, tuple[tuple[str, int], ...]] = field(default_factory=dict)

    @property
    def meeting_wide_count(self) -> int:
        return len(self.meeting_people)

    def session_count(self, wg: str) -> int:
        return len(self.session_people.get(wg, ()))

    def top_affiliations(self, wg: str) -> tuple[tuple[str, int], ...]:
        return self.session_affiliations.get(wg, ())


def _lookup(entities: list[CanonicalEntity]) -> dict[str, CanonicalEntity]:
    return {form: e for e in entities for form in e.normalized_forms}


def resolve_attendance(
    rows: list[RawAttendanceRow],
    *,
    affiliation_threshold: float = AFFILIATION_THRESHOLD,
    person_threshold: float = PERSON_THRESHOLD,
) -> tuple[AttendanceLedger, list[CanonicalEntity]]:
    """Cluster names and affiliations, then count unique people per scope.

    Each person counts once per session, under the affiliation they used most
    often in that session (ties: smallest label). Meeting-wide people are
    everyone seen anywhere, registrations and session sign-ins alike.
    """
    names = [normalize(r.raw_name) for r in rows]
    affils = [normalize(r.raw_affiliation) for r in rows]

    people = cluster(names, "person", person_threshold)
    real_affils = [a for a in affils if a.normalized and a.normalized != UNAFFILIATED]
    orgs = cluster(real_affils, "affiliation", affiliation_threshold)
    unaffiliated_forms = [a for a in affils if not a.normalized or a.normalized == UNAFFILIATED]
    entities: list[CanonicalEntity] = [*people, *orgs]
    if unaffiliated_forms:
        entities.append(
            CanonicalEntity(
                id=UNAFFILIATED_ID,
                kind="affiliation",
                label=UNAFFILIATED,
                surface_forms=frozenset(a.original for a in unaffiliated_forms if a.original.strip()),
                frequency=len(unaffiliated_forms),
                normalized_forms=frozenset(a.normalized for a in unaffiliated_forms),
            )
        )

    person_of = _lookup(people)
    org_of = _lookup(orgs)
    labels = {e.id: e.label for e in entities}
    meeting: set[str] = set()
    per_session: dict[str, dict[str, Counter[str]]] = defaultdict(lambda: defaultdict(Counter))
    for row, name, affil in zip(rows, names, affils):
        pid = person_of[name.normalized].id
        meeting.add(pid)
        if row.session is None:
            continue
        org = org_of.get(affil.normalized)
        per_session[row.session][pid][org.id if org else UNAFFILIATED_ID] += 1

    session_people: dict[str, tuple[str, ...]] = {}
    session_affiliations: dict[str, tuple[tuple[str, int], ...]] = {}
    for wg in sorted(per_session):
        attendees = per_session[wg]
        session_people[wg] = tuple(sorted(attendees))
        tally: Counter[str] = Counter()
        for pid in attendees:
            used = attendees[pid]
            tally[min(used, key=lambda oid: (-used[oid], labels[oid]))] += 1
        ranked = sorted(((labels[oid], n) for oid, n in tally.items()), key=lambda t: (-t[1], t[0]))
        session_affiliations[wg] = tuple(ranked)

    ledger = AttendanceLedger(tuple(sorted(meeting)), session_people, session_affiliations)
    return ledger, entities
