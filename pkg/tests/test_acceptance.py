"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import itertools
import json
import random
import re
import string
import time
from datetime import datetime, timedelta, timezone

import pytest

import oracles
from conftest import MIRROR, ScriptedBackend
from wgreport.cli import main
from wgreport.corpus import build_corpus, load, save
from wgreport.errors import GroundingError, RateLimitExhausted
from wgreport.index import chunk_document
from wgreport.ingest import RawAttendanceRow, RawSession
from wgreport.llm import BackendPolicy, CompletionRequest, MockBackend, classify_model, complete, load_registry
from wgreport.llm import summarize_wg
from wgreport.report import (
    AttendeesOverview,
    Discussion,
    WgReport,
    assemble_master,
    compose,
    latex_balanced,
    markdown_headings_contiguous,
    render,
)
from wgreport.resolve import AFFILIATION_THRESHOLD, cluster, lev_ratio, normalize, normalize_text, resolve_attendance

STAMP = "2024-03-26T12:00:00Z"


@pytest.fixture
def verdict(capsys, request):
    """Call with (ok, detail); prints the criterion line and asserts."""

    def emit(ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}")
        assert ok, detail

    return emit


# 1 -------------------------------------------------------------------------

TABLE = [
    ("codestral:latest", 22.2, 12, "Large"),
    ("llama3:70b-instruct", 70.6, 39, "Large"),
    ("command-r:latest", 35, 20, "Large"),
    ("mixtral:latest", 47, 26, "Large"),
    ("gemma2", 9.2, 5.4, "Small"),
    ("phi3", 3.8, 2.4, "Small"),
    ("llama3", 8, 4.7, "Small"),
]


def test_criterion_01_model_registry(verdict):
    t0 = time.perf_counter()
    reg = load_registry()
    rows = {(s.name, s.parameters_billions, s.size_gb, s.category) for s in reg.values()}
    matches = sum(row in rows for row in TABLE)
    classified = sum(classify_model(p) == cat for _, p, _, cat in TABLE)
    elapsed = time.perf_counter() - t0
    ok = len(reg) == 7 and matches == 7 and classified == 7 and elapsed < 1
    verdict(ok, f"rows {matches}/7, classify {classified}/7, {elapsed:.3f}s")


# 2 -------------------------------------------------------------------------


def test_criterion_02_lev_ratio_oracle(verdict):
    rng = random.Random(20240326)
    alphabet = "abcde "
    t0 = time.perf_counter()
    pairs = [
        tuple("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40))) for _ in range(2))
        for _ in range(1000)
    ]
    pairs += [(a, b) for a in ["", "a", "ericsson", "jon smith"] for b in ["", "b", "ericsson ab", "john smith"]]
    mismatches = [(a, b) for a, b in pairs if lev_ratio(a, b).value != oracles.ratio(a, b)]
    elapsed = time.perf_counter() - t0
    verdict(not mismatches and elapsed < 5, f"{len(pairs) - len(mismatches)}/{len(pairs)} equal, {elapsed:.2f}s")


# 3 -------------------------------------------------------------------------

SURFACE_FORMS = [
    "Ericsson",
    "Ericsson AB",
    "ERICSSON",
    "Meta Platforms, Inc.",
    "Meta",
    "Huawei Technologies",
    "Huawei",
    "Huawei Technologies Co., Ltd.",
    "Cisco Systems",
    "Cisco",
    "Nokia",
    "Nokia Bell Labs",
]


def _oracle_components(forms: list[str], threshold: float) -> set[frozenset[str]]:
    """Connected components of the brute-force pairwise token-set graph."""
    nodes = sorted({normalize_text(f) for f in forms})
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for a, b in itertools.combinations(nodes, 2):
        if oracles.token_set(a, b) >= threshold:
            parent[find(a)] = find(b)
    groups: dict[str, set[str]] = {}
    for n in nodes:
        groups.setdefault(find(n), set()).add(n)
    return {frozenset(g) for g in groups.values()}


def test_criterion_03_entity_resolution(verdict):
    expected = _oracle_components(SURFACE_FORMS, AFFILIATION_THRESHOLD)
    rows = [normalize(f) for f in SURFACE_FORMS]
    got = {frozenset(e.normalized_forms) for e in cluster(rows, "affiliation", AFFILIATION_THRESHOLD)}
    rng = random.Random(3)
    stable = 0
    for _ in range(20):
        shuffled = rows[:]
        rng.shuffle(shuffled)
        again = {frozenset(e.normalized_forms) for e in cluster(shuffled, "affiliation", AFFILIATION_THRESHOLD)}
        stable += again == got
    ok = len(expected) == 5 and got == expected and stable == 20
    verdict(ok, f"{len(got)} clusters (oracle {len(expected)}), permutation-stable {stable}/20")


# 4 -------------------------------------------------------------------------


def test_criterion_04_fixture_report_structure(tmp_path, verdict, capsys):
    t0 = time.perf_counter()
    args = ["--meeting", "119", "--mirror", str(MIRROR), "--out", str(tmp_path), "--timestamp", STAMP]
    code = main(["run", *args, "--backend", "mock", "--format", "md"])
    capsys.readouterr()
    elapsed = time.perf_counter() - t0
    wg = (tmp_path / "119" / "6lo.md").read_text()
    master = (tmp_path / "119" / "report.md").read_text()
    agenda = (MIRROR / "119" / "6lo" / "agenda.md").read_text()
    agenda_titles = [re.sub(r",\s*draft-.*$", "", line.split(". ", 1)[1]) for line in agenda.splitlines() if line[:1].isdigit()]
    discussion = wg.split("## Meeting Discussions", 1)[1]
    subsections = [line[4:] for line in discussion.splitlines() if line.startswith("### ")]
    overview = wg.split("## Attendees Overview", 1)[1].split("## Meeting Discussions", 1)[0]
    ok = (
        code == 0
        and "attended by 22 participants" in overview
        and subsections == agenda_titles
        and len(subsections) == 5
        and master.splitlines()[0] == "# IETF119 Meeting Report"
        and "Generated by IETF Reporter" in master
        and elapsed < 5
    )
    verdict(ok, f"count 22 in overview, {len(subsections)} topics in agenda order, title ok, {elapsed:.2f}s")


# 5 -------------------------------------------------------------------------

_LINK_RE = re.compile(r"datatracker\.ietf\.org/doc/([a-z0-9.-]+)")


def test_criterion_05_grounding(fixture_corpus, fixture_index, verdict):
    cited, ungrounded = 0, []
    for wg in fixture_corpus.sessions:
        report = compose(summarize_wg(fixture_corpus, fixture_index, wg, MockBackend()), fixture_corpus.session(wg))
        known = set(fixture_corpus.session(wg).draft_names)
        for fmt in ("md", "tex"):
            for name in _LINK_RE.findall(render(report, fmt).body):
                cited += 1
                if name not in known:
                    ungrounded.append(name)
    invented = ["draft-nonexistent-00", "draft-ietf-6lo-imaginary", "draft-fake-thing-12"]
    detected = 0
    trials = 0
    for wg in fixture_corpus.sessions:
        for name in invented:
            for where in ("drafts", "body", "overview"):
                trials += 1
                topic = {"title": "t", "body": "", "drafts": []}
                payload = {"overview": "o", "topics": [topic]}
                if where == "drafts":
                    topic["drafts"] = [name]
                elif where == "body":
                    topic["body"] = f"see {name}"
                else:
                    payload["overview"] = f"mentions {name}"
                reply = json.dumps(payload)
                backend = ScriptedBackend([lambda r, reply=reply: reply if "single JSON object" in r.user_prompt else "s"])
                try:
                    summarize_wg(fixture_corpus, fixture_index, wg, backend)
                except GroundingError:
                    detected += 1
    ok = cited > 0 and not ungrounded and detected == trials
    verdict(ok, f"{cited} links all grounded, fault injection detected {detected}/{trials}")


# 6 -------------------------------------------------------------------------


def test_criterion_06_chunk_reconstruction(verdict):
    rng = random.Random(6)
    pieces = ["word ", "Sentence ends. ", "Why? ", "\n", "\n\n", "é", "x" * 17, " ", "!\n"]
    t0 = time.perf_counter()
    failures = 0
    for _ in range(500):
        text = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 300)))
        budget = rng.randint(1, 200)
        overlap = rng.randint(0, budget - 1)
        chunks = chunk_document(text, budget, overlap)
        if "".join(c.fresh_text for c in chunks) != text or any(c.est_tokens > budget for c in chunks):
            failures += 1
    elapsed = time.perf_counter() - t0
    verdict(failures == 0 and elapsed < 10, f"{500 - failures}/500 reconstructed, {elapsed:.2f}s")


# 7 -------------------------------------------------------------------------


class _FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now

    def sleep(self, seconds):
        self.now += seconds


def test_criterion_07_retry_and_rate_limit(verdict):
    req = CompletionRequest("s", "u", 8)
    policy = BackendPolicy(max_retries=3, base_backoff_ms=500, requests_per_minute=60)
    slept = []

    ok_backend = ScriptedBackend([429, 429, "fine"])
    reply = complete(ok_backend, req, policy, sleep=slept.append)
    first = reply == "fine" and len(ok_backend.requests) == 3

    bad_backend = ScriptedBackend([500, 500, 500, 500])
    try:
        complete(bad_backend, req, policy, sleep=slept.append)
        second = False
    except RateLimitExhausted as exc:
        second = exc.attempts == 4 and len(bad_backend.requests) == 4

    rpm = 10
    clock = _FakeClock()
    dispatches: list[float] = []
    limited = ScriptedBackend([lambda r: dispatches.append(clock()) or "ok"])
    tight = BackendPolicy(requests_per_minute=rpm)
    limited.limiter(tight, clock=clock, sleep=clock.sleep)
    rng = random.Random(7)
    for _ in range(200):
        clock.now += rng.choice([0.0, 0.0, 0.5, 3.0, 20.0])
        complete(limited, req, tight, sleep=clock.sleep)
    worst = max(sum(1 for u in dispatches if t <= u < t + 60) for t in dispatches)
    third = worst <= rpm and len(dispatches) == 200
    verdict(first and second and third, f"[429,429,200] ok={first}, [500x4] ok={second}, max per 60s window {worst}/{rpm}")


# 8 -------------------------------------------------------------------------


def test_criterion_08_determinism(tmp_path, verdict, capsys):
    produced = {}
    for run in ("a", "b"):
        for fmt in ("md", "tex"):
            args = ["--meeting", "119", "--mirror", str(MIRROR), "--out", str(tmp_path / run / fmt)]
            assert main(["run", *args, "--timestamp", STAMP, "--format", fmt]) == 0
        produced[run] = {
            p.relative_to(tmp_path / run).as_posix(): p.read_bytes()
            for p in sorted((tmp_path / run).rglob("*"))
            if p.is_file()
        }
    capsys.readouterr()
    same = produced["a"] == produced["b"]
    has_all = all(any(k.endswith(n) for k in produced["a"]) for n in ("corpus.json", "index.json", "report.md", "report.tex"))
    verdict(same and has_all, f"{len(produced['a'])} files byte-identical across runs: {same}")


# 9 -------------------------------------------------------------------------

HOSTILE = list("\\{}$&#_%^~[]<>`*=-!|\n\t ") + ["\\begin{x}", "\\end{y}", "```", "# ", "\n===\n", "<!--", "ab", "é"]


def _hostile(rng: random.Random, n: int) -> str:
    return "".join(rng.choice(HOSTILE + list(string.ascii_letters)) for _ in range(rng.randint(0, n)))


def test_criterion_09_renderer_validity(verdict):
    rng = random.Random(9)
    failures = 0
    for i in range(200):
        discussions = tuple(
            Discussion(_hostile(rng, 20), _hostile(rng, 80), (), tuple(_hostile(rng, 10) for _ in range(rng.randint(0, 2))))
            for _ in range(rng.randint(0, 4))
        )
        report = WgReport(
            _hostile(rng, 20),
            f"wg{i}",
            AttendeesOverview(rng.randint(0, 300), tuple(_hostile(rng, 12) for _ in range(rng.randint(0, 5))), _hostile(rng, 80)),
            discussions,
        )
        attribution = _hostile(rng, 20)
        tex = assemble_master([report], 119, "tex", attribution=attribution).body
        md = assemble_master([report], 119, "md", attribution=attribution).body
        if not (latex_balanced(tex) and latex_balanced(render(report, "tex").body)):
            failures += 1
        elif not (markdown_headings_contiguous(md) and markdown_headings_contiguous(render(report, "md").body)):
            failures += 1
    verdict(failures == 0, f"{200 - failures}/200 randomized reports valid")


# 10 ------------------------------------------------------------------------


def _random_corpus(rng: random.Random):
    wgs = sorted({"".join(rng.choice("abcdefg0123") for _ in range(rng.randint(2, 5))) for _ in range(rng.randint(0, 4))})
    wgs = [w for w in wgs if w[0].isalpha()]
    sessions = [
        RawSession(w, w.upper() + " WG", 120, _hostile(rng, 40), _hostile(rng, 60) + " draft-x-" + w, ())
        for w in wgs
    ]
    people = ["Ann Lee", "Bo Chen", "Carla Diaz", "Dev Patel", "Eun-ji Kim", "Ann  Lee"]
    orgs = ["Acme", "Acme Inc.", "Zeta", "", "Unaffiliated", "Ωmega"]
    rows = [
        RawAttendanceRow(rng.choice(people), rng.choice(orgs), rng.choice(wgs + [None]) if wgs else None)
        for _ in range(rng.randint(0, 12))
    ]
    ledger, entities = resolve_attendance(rows)
    created = datetime(2024, 1, 1, tzinfo=timezone.utc) + timedelta(seconds=rng.randint(0, 10**8))
    return build_corpus(sessions, ledger, entities, meeting_number=120, created_at=created)


def test_criterion_10_corpus_round_trip(tmp_path, verdict):
    rng = random.Random(10)
    t0 = time.perf_counter()
    equal = 0
    for i in range(100):
        c = _random_corpus(rng)
        equal += load(save(c, tmp_path / str(i).zfill(3)).parent) == c
    elapsed = time.perf_counter() - t0
    verdict(equal == 100 and elapsed < 5, f"{equal}/100 round-trips exact, {elapsed:.2f}s")
