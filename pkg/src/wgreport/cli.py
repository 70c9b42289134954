"""Command-line driver: ``sync`` → ``build`` → ``report`` (or ``run`` for all three).

Exit codes: 0 success, 2 input or configuration error, 3 backend or
network error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

from . import corpus as corpus_store
from .corpus import format_timestamp, parse_timestamp
from .errors import ParseError, WgReportError
from .http import Transport, TransportError
from .index import index_corpus, load_index, save_index
from .ingest import RawAttendanceRow, RawSession, SourceConfig, fetch_sessions, load_attendance
from .llm import ApiBackend, Backend, LocalBackend, MockBackend, load_registry, summarize_wg
from .report import EXTENSIONS, assemble_master, compose, normalize_format, render
from .resolve import AFFILIATION_THRESHOLD, PERSON_THRESHOLD, resolve_attendance

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("wgreport")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKEND = 3
SNAPSHOT_FILE = "snapshot.json"
SNAPSHOT_SCHEMA = 1
DEFAULT_CONFIG = "insights.toml"
DEFAULT_MODELS = {"mock": "mock", "api": "gpt-4o", "local": "llama3"}
API_CONTEXT_TOKENS = 128_000
LOCAL_FALLBACK_CONTEXT = 8192


@dataclass
class RunConfig:
    meeting: int
    format: str = "markdown"
    wgs: list[str] | None = None
    backend: str = "mock"
    model: str | None = None
    out_dir: Path = Path("out")
    mirror: Path | None = None
    api_base: str | None = None
    affil_threshold: float = AFFILIATION_THRESHOLD
    person_threshold: float = PERSON_THRESHOLD
    parallelism: int = 2
    timestamp: datetime | None = None
    attribution: str | None = None
    emit_json: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.meeting, int) or self.meeting <= 0:
            raise ValueError(f"--meeting must be a positive integer, got {self.meeting!r}")
        if self.parallelism < 1:
            raise ValueError("--parallelism must be >= 1")
        if self.wgs is not None and not self.wgs:
            raise ValueError("--wg, when given, must name at least one working group")
        if self.backend not in DEFAULT_MODELS:
            raise ValueError(f"--backend must be one of {', '.join(DEFAULT_MODELS)}")
        self.format = normalize_format(self.format)
        self.model = self.model or DEFAULT_MODELS[self.backend]

    @property
    def meeting_dir(self) -> Path:
        return self.out_dir / str(self.meeting)


# --- argument handling ------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"key = value settings file (default: ./{DEFAULT_CONFIG} if present)")
    p.add_argument("--meeting", type=int, help="meeting number, e.g. 119")
    p.add_argument("--format", choices=["md", "tex", "markdown", "latex"], help="report format (default md)")
    p.add_argument("--wg", help="comma-separated working group acronyms (default: all)")
    p.add_argument("--backend", choices=list(DEFAULT_MODELS), help="completion backend (default mock)")
    p.add_argument("--model", help="model name passed to the backend")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--mirror", help="root of the rsync'd meeting mirror")
    p.add_argument("--api-base", help="datatracker-style API base URL")
    p.add_argument("--affil-threshold", type=float, help=f"affiliation match threshold (default {AFFILIATION_THRESHOLD:g})")
    p.add_argument("--person-threshold", type=float, help=f"person match threshold (default {PERSON_THRESHOLD:g})")
    p.add_argument("--parallelism", type=int, help="concurrent fetches / working groups (default 2)")
    p.add_argument("--timestamp", help="ISO-8601 UTC timestamp recorded instead of the clock")
    p.add_argument("--attribution", help="attribution line on the master document")
    p.add_argument("--json", action="store_true", default=None, help="print a one-line JSON run summary")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgreport", description="Per-working-group meeting reports.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sync": "fetch sessions and attendance into a raw snapshot",
        "build": "resolve identities and build corpus.json + index.json",
        "report": "summarize working groups and render the reports",
        "run": "sync, build and report in one go",
    }
    for name, text in helps.items():
        _add_common(sub.add_parser(name, help=text, description=text))
    return parser


def _read_config(path: str | None) -> dict[str, Any]:
    candidate = Path(path) if path else Path(DEFAULT_CONFIG)
    if not candidate.is_file():
        if path:
            raise ValueError(f"config file {path} not found")
        return {}
    try:
        with candidate.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"{candidate}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in data.items()}


def _split_wgs(value: Any) -> list[str] | None:
    if value is None:
        return None
    items = value if isinstance(value, list) else str(value).split(",")
    return [str(i).strip().lower() for i in items if str(i).strip()]


def config_from_args(args: argparse.Namespace) -> RunConfig:
    file_cfg = _read_config(args.config)

    def pick(flag: str, key: str | None = None, default: Any = None) -> Any:
        value = getattr(args, flag)
        if value is not None:
            return value
        return file_cfg.get(key or flag, default)

    meeting = pick("meeting")
    if meeting is None:
        raise ValueError("--meeting is required")
    timestamp = pick("timestamp")
    wgs = pick("wg")
    return RunConfig(
        meeting=int(meeting),
        format=pick("format", default="md"),
        wgs=_split_wgs(wgs) if wgs is not None else None,
        backend=pick("backend", default="mock"),
        model=pick("model"),
        out_dir=Path(pick("out", default="out")),
        mirror=Path(m) if (m := pick("mirror")) else None,
        api_base=pick("api_base"),
        affil_threshold=float(pick("affil_threshold", default=AFFILIATION_THRESHOLD)),
        person_threshold=float(pick("person_threshold", default=PERSON_THRESHOLD)),
        parallelism=int(pick("parallelism", default=2)),
        timestamp=parse_timestamp(str(timestamp)) if timestamp else None,
        attribution=pick("attribution"),
        emit_json=bool(pick("json", default=False)),
        extra={k: file_cfg[k] for k in ("local_base",) if k in file_cfg},
    )


# --- commands ---------------------------------------------------------------


@dataclass
class Outcome:
    outputs: list[str] = field(default_factory=list)


def _write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


def _mirror_timestamp(meeting_dir: Path) -> datetime:
    mtimes = [p.stat().st_mtime for p in meeting_dir.rglob("*") if p.is_file()]
    latest = max(mtimes, default=0.0)
    return datetime.fromtimestamp(int(latest), tz=timezone.utc)


def cmd_sync(cfg: RunConfig, transport: Transport | None = None) -> Outcome:
    if cfg.mirror is None and cfg.api_base is None:
        raise ValueError("sync needs --mirror or --api-base")
    source = SourceConfig(cfg.meeting, api_base_url=cfg.api_base, mirror_root=cfg.mirror)
    sessions = fetch_sessions(source, transport=transport, parallelism=cfg.parallelism)
    rows, skipped = load_attendance(source)
    if cfg.timestamp is not None:
        synced_at = cfg.timestamp
    elif cfg.mirror is not None:
        synced_at = _mirror_timestamp(source.meeting_dir)
    else:
        synced_at = datetime.now(timezone.utc).replace(microsecond=0)
    snapshot = {
        "schema": SNAPSHOT_SCHEMA,
        "meeting_number": cfg.meeting,
        "source": "mirror" if cfg.mirror is not None else "api",
        "synced_at": format_timestamp(synced_at),
        "sessions": [
            {
                "wg_acronym": s.wg_acronym,
                "wg_name": s.wg_name,
                "agenda_text": s.agenda_text,
                "minutes_text": s.minutes_text,
                "draft_names": list(s.draft_names),
            }
            for s in sessions
        ],
        "attendance": [
            {"name": r.raw_name, "affiliation": r.raw_affiliation, "session": r.session} for r in rows
        ],
        "skipped_rows": skipped,
    }
    logger.info("synced %d sessions, %d attendance rows (%d skipped)", len(sessions), len(rows), skipped)
    return Outcome([_write(cfg.meeting_dir / SNAPSHOT_FILE, corpus_store.dumps(snapshot))])


def load_snapshot(path: Path) -> tuple[list[RawSession], list[RawAttendanceRow], datetime]:
    try:
        data = json.loads(path.read_text(encoding="utf-8", errors="replace"))
    except FileNotFoundError:
        raise ParseError("snapshot missing; run `wgreport sync` first", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"corrupt snapshot: {exc}", str(path)) from exc
    try:
        if data["schema"] != SNAPSHOT_SCHEMA:
            raise ParseError(f"unsupported snapshot schema {data['schema']!r}", str(path))
        meeting = int(data["meeting_number"])
        sessions = [
            RawSession(s["wg_acronym"], s["wg_name"], meeting, s["agenda_text"], s["minutes_text"], tuple(s["draft_names"]))
            for s in data["sessions"]
        ]
        rows = [RawAttendanceRow(r["name"], r["affiliation"], r["session"]) for r in data["attendance"]]
        return sessions, rows, parse_timestamp(data["synced_at"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"corrupt snapshot: {exc!r}", str(path)) from exc


def cmd_build(cfg: RunConfig) -> Outcome:
    sessions, rows, synced_at = load_snapshot(cfg.meeting_dir / SNAPSHOT_FILE)
    ledger, entities = resolve_attendance(
        rows, affiliation_threshold=cfg.affil_threshold, person_threshold=cfg.person_threshold
    )
    corpus = corpus_store.build_corpus(
        sessions, ledger, entities, meeting_number=cfg.meeting, created_at=cfg.timestamp or synced_at
    )
    index = index_corpus(corpus)
    return Outcome([str(corpus_store.save(corpus, cfg.meeting_dir)), str(save_index(index, cfg.meeting_dir))])


def make_backend(cfg: RunConfig, transport: Transport | None = None) -> Backend:
    if cfg.backend == "mock":
        return MockBackend()
    assert cfg.model is not None
    spec = load_registry().get(cfg.model)
    if cfg.backend == "local":
        context = spec.context_tokens if spec else LOCAL_FALLBACK_CONTEXT
        base = cfg.extra.get("local_base") or "http://localhost:11434"
        return LocalBackend(cfg.model, base, context_tokens=context, transport=transport)
    context = spec.context_tokens if spec else API_CONTEXT_TOKENS
    return ApiBackend(cfg.model, context_tokens=context, transport=transport)


def cmd_report(cfg: RunConfig, backend: Backend | None = None) -> Outcome:
    corpus = corpus_store.load(cfg.meeting_dir)
    index = load_index(cfg.meeting_dir)
    wgs = cfg.wgs if cfg.wgs is not None else sorted(corpus.sessions)
    unknown = [w for w in wgs if w not in corpus.sessions]
    if unknown:
        raise ValueError(f"unknown working group(s): {', '.join(unknown)}")
    wgs = sorted(dict.fromkeys(wgs))
    backend = backend or make_backend(cfg)

    def one(wg: str):
        summary = summarize_wg(corpus, index, wg, backend)
        return compose(summary, corpus.sessions[wg])

    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        reports = list(pool.map(one, wgs))

    ext = EXTENSIONS[cfg.format]
    outputs = []
    for report in reports:
        doc = render(report, cfg.format)
        outputs.append(_write(cfg.meeting_dir / f"{report.wg_acronym}{ext}", doc.body))
    kwargs = {"date": corpus.created_at}
    if cfg.attribution is not None:
        kwargs["attribution"] = cfg.attribution
    master = assemble_master(reports, cfg.meeting, cfg.format, **kwargs)
    outputs.append(_write(cfg.meeting_dir / f"report{ext}", master.body))
    return Outcome(outputs)


def cmd_run(cfg: RunConfig) -> Outcome:
    out = Outcome()
    for step in (cmd_sync, cmd_build, cmd_report):
        out.outputs += step(cfg).outputs
    return out


COMMANDS: dict[str, Callable[[RunConfig], Outcome]] = {
    "sync": cmd_sync,
    "build": cmd_build,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    emit_json = bool(args.json)
    outputs: list[str] = []
    errors: list[str] = []
    code = EXIT_OK
    try:
        cfg = config_from_args(args)
        emit_json = cfg.emit_json
        outputs = COMMANDS[args.command](cfg).outputs
    except WgReportError as exc:
        code = exc.exit_code
        errors.append(f"{type(exc).__name__}: {exc}")
    except TransportError as exc:
        code = EXIT_BACKEND
        errors.append(f"{type(exc).__name__}: {exc}")
    except (ValueError, OSError) as exc:
        code = EXIT_INPUT
        errors.append(f"{type(exc).__name__}: {exc}")

    for err in errors:
        print(f"wgreport {args.command}: {err}", file=sys.stderr)
    if emit_json:
        summary = {"command": args.command, "ok": code == EXIT_OK, "outputs": outputs, "errors": errors}
        print(json.dumps(summary, sort_keys=True))
    elif code == EXIT_OK:
        for path in outputs:
            print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
