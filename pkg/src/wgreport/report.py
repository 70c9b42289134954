"""Compose per-WG reports and render them as Markdown or LaTeX.

Only data-derived text is escaped; the scaffolding around it is emitted
verbatim. Per-WG LaTeX files are fragments meant for the master document,
which is self-contained and compiles on its own.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Literal
from urllib.parse import quote

from .corpus import SessionRecord
from .errors import ConsistencyError, DuplicateWg
from .llm.summarize import WgSummary
from .resolve import UNAFFILIATED

Format = Literal["markdown", "latex"]

DATATRACKER_DOC_URL = "https://datatracker.ietf.org/doc/"
DEFAULT_ATTRIBUTION = "Generated by IETF Reporter"
MAX_PROMINENT = 5
FORMAT_ALIASES = {"md": "markdown", "markdown": "markdown", "tex": "latex", "latex": "latex"}
EXTENSIONS = {"markdown": ".md", "latex": ".tex"}


@dataclass(frozen=True)
class AttendeesOverview:
    count: int
    prominent_affiliations: tuple[str, ...] = ()
    narrative: str = ""


@dataclass(frozen=True)
class Discussion:
    title: str
    body: str = ""
    draft_links: tuple[str, ...] = ()
    presenters: tuple[str, ...] = ()


@dataclass(frozen=True)
class WgReport:
    wg_name: str
    wg_acronym: str
    attendees_overview: AttendeesOverview
    discussions: tuple[Discussion, ...] = ()


@dataclass(frozen=True)
class RenderedDocument:
    format: Format
    body: str
    wg_count: int


def normalize_format(fmt: str) -> Format:
    try:
        return FORMAT_ALIASES[fmt]  # type: ignore[return-value]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}; use md or tex") from None


def compose(summary: WgSummary, session: SessionRecord, max_affiliations: int = MAX_PROMINENT) -> WgReport:
    if summary.wg_acronym != session.wg_acronym:
        raise ConsistencyError(f"summary is for {summary.wg_acronym!r} but session is {session.wg_acronym!r}")
    known = set(session.draft_names)
    stray = [d for t in summary.topics for d in t.draft_links if d not in known]
    if stray:
        raise ConsistencyError(f"{session.wg_acronym}: draft links outside the corpus: {', '.join(stray)}")
    overview = AttendeesOverview(
        count=session.attendee_count,
        prominent_affiliations=tuple(label for label, _ in session.top_affiliations[:max_affiliations]),
        narrative=summary.overview,
    )
    discussions = tuple(
        Discussion(t.title, t.body, t.draft_links, t.presenters) for t in summary.topics
    )
    return WgReport(session.wg_name, session.wg_acronym, overview, discussions)


def draft_url(name: str) -> str:
    return DATATRACKER_DOC_URL + name


def wg_heading(report: WgReport) -> str:
    if report.wg_name and report.wg_name.lower() != report.wg_acronym.lower():
        return f"{report.wg_name} ({report.wg_acronym})"
    return report.wg_acronym


def _join_names(names: Iterable[str]) -> str:
    names = list(names)
    if len(names) <= 1:
        return "".join(names)
    return ", ".join(names[:-1]) + " and " + names[-1]


def attendance_sentence(overview: AttendeesOverview) -> str:
    noun = "participant" if overview.count == 1 else "participants"
    text = f"The session was attended by {overview.count} {noun}"
    named = [a for a in overview.prominent_affiliations if a != UNAFFILIATED]
    if named:
        text += f", including people from {_join_names(named)}"
    return text + "."


# --- escaping ---------------------------------------------------------------

_LATEX_SPECIALS = {
    "\\": r"\textbackslash{}",
    "{": r"\{",
    "}": r"\}",
    "#": r"\#",
    "$": r"\$",
    "%": r"\%",
    "&": r"\&",
    "_": r"\_",
    "~": r"\textasciitilde{}",
    "^": r"\textasciicircum{}",
}
_LATEX_RE = re.compile("[" + re.escape("".join(_LATEX_SPECIALS)) + "]")


def latex_escape(text: str) -> str:
    return _LATEX_RE.sub(lambda m: _LATEX_SPECIALS[m.group(0)], text)


def _one_line(text: str) -> str:
    return " ".join(text.split())


_MD_HASH_RE = re.compile(r"^\s*(#)")
_MD_UNDERLINE_RE = re.compile(r"^\s*(=+|-+)\s*$")
_MD_FENCE_RE = re.compile(r"^\s*(`{3}|~{3})")
_MD_HTML_RE = re.compile(r"^\s*<")


def md_escape_block(text: str) -> str:
    """Neutralise line starts Markdown would read as headings, fences or HTML blocks."""
    lines = []
    for line in text.splitlines():
        line = line.rstrip()
        for pattern in (_MD_HASH_RE, _MD_UNDERLINE_RE, _MD_FENCE_RE, _MD_HTML_RE):
            m = pattern.match(line)
            if m:
                line = "\\" + line.lstrip()
                break
        lines.append(line)
    return "\n".join(lines).strip()


def md_escape_inline(text: str) -> str:
    text = _one_line(text)
    return re.sub(r"([\\`*_\[\]<>])", r"\\\1", text)


# --- markdown ---------------------------------------------------------------


def _slug(text: str) -> str:
    text = re.sub(r"[^\w\- ]", "", text.lower())
    return text.replace(" ", "-")


def _render_markdown(report: WgReport) -> str:
    ov = report.attendees_overview
    out = [f"# {md_escape_inline(wg_heading(report))}", "", "## Attendees Overview", "", "### Attendance Summary", ""]
    out += [md_escape_inline(attendance_sentence(ov)), ""]
    if ov.narrative.strip():
        out += [md_escape_block(ov.narrative), ""]
    out += ["## Meeting Discussions", ""]
    if not report.discussions:
        out += ["No discussion was recorded for this session.", ""]
    for d in report.discussions:
        out += [f"### {md_escape_inline(d.title) or '(untitled)'}", ""]
        if d.presenters:
            out += [f"Presented by {md_escape_inline(_join_names(d.presenters))}.", ""]
        if d.body.strip():
            out += [md_escape_block(d.body), ""]
        if d.draft_links:
            links = ", ".join(f"[{md_escape_inline(n)}]({quote(draft_url(n), safe=':/')})" for n in d.draft_links)
            out += [f"Drafts: {links}", ""]
    return "\n".join(out).rstrip() + "\n"


# --- latex ------------------------------------------------------------------


def _render_latex(report: WgReport) -> str:
    ov = report.attendees_overview
    out = [
        f"\\section{{{latex_escape(_one_line(wg_heading(report)))}}}",
        "",
        "\\subsection{Attendees Overview}",
        "",
        "\\subsubsection{Attendance Summary}",
        "",
        latex_escape(attendance_sentence(ov)),
        "",
    ]
    if ov.narrative.strip():
        out += [latex_escape(ov.narrative.strip()), ""]
    out += ["\\subsection{Meeting Discussions}", ""]
    if not report.discussions:
        out += ["No discussion was recorded for this session.", ""]
    for d in report.discussions:
        out += [f"\\subsubsection{{{latex_escape(_one_line(d.title)) or '(untitled)'}}}", ""]
        if d.presenters:
            out += [f"Presented by {latex_escape(_join_names(_one_line(p) for p in d.presenters))}.", ""]
        if d.body.strip():
            out += [latex_escape(d.body.strip()), ""]
        if d.draft_links:
            links = ", ".join(f"\\href{{{latex_escape(draft_url(n))}}}{{{latex_escape(n)}}}" for n in d.draft_links)
            out += [f"Drafts: {links}", ""]
    return "\n".join(out).rstrip() + "\n"


def render(report: WgReport, fmt: str) -> RenderedDocument:
    fmt = normalize_format(fmt)
    body = _render_markdown(report) if fmt == "markdown" else _render_latex(report)
    return RenderedDocument(fmt, body, 1)


# --- master document --------------------------------------------------------


def format_date(ts: datetime) -> str:
    return f"{ts.day} {ts:%B %Y}"


def assemble_master(
    reports: Iterable[WgReport],
    meeting_number: int,
    fmt: str,
    *,
    attribution: str = DEFAULT_ATTRIBUTION,
    date: datetime | None = None,
) -> RenderedDocument:
    """One document holding every WG chapter, ordered by acronym."""
    fmt = normalize_format(fmt)
    reports = list(reports)
    seen: set[str] = set()
    for r in reports:
        if r.wg_acronym in seen:
            raise DuplicateWg(f"working group {r.wg_acronym!r} appears more than once")
        seen.add(r.wg_acronym)
    reports.sort(key=lambda r: r.wg_acronym)
    title = f"IETF{meeting_number} Meeting Report"
    when = format_date(date) if date else ""

    if fmt == "markdown":
        out = [f"# {title}", "", md_escape_block(md_escape_inline(attribution))]
        if when:
            out += ["", when]
        out += ["", "## Contents", ""]
        for n, r in enumerate(reports, 1):
            heading = md_escape_inline(wg_heading(r))
            out.append(f"{n}. [{heading}](#{_slug(heading)})")
        if not reports:
            out.append("No working groups were selected.")
        out.append("")
        for r in reports:
            out += [_render_markdown(r)]
        body = "\n".join(out).rstrip() + "\n"
    else:
        out = [
            "\\documentclass[11pt]{article}",
            "\\usepackage[utf8]{inputenc}",
            "\\usepackage[T1]{fontenc}",
            "\\usepackage{hyperref}",
            "",
            f"\\title{{{title}}}",
            f"\\author{{{latex_escape(_one_line(attribution))}}}",
            f"\\date{{{latex_escape(when)}}}",
            "",
            "\\begin{document}",
            "\\maketitle",
            "\\tableofcontents",
            "",
        ]
        for r in reports:
            out += ["\\clearpage", _render_latex(r)]
        out += ["\\end{document}"]
        body = "\n".join(out) + "\n"
    return RenderedDocument(fmt, body, len(reports))


# --- validity checks --------------------------------------------------------


def latex_balanced(body: str) -> bool:
    """Braces nest properly and every \\begin{env} meets its \\end{env}.

    Escaped braces and comments are skipped.
    """
    depth = 0
    envs: list[str] = []
    i, n = 0, len(body)
    while i < n:
        ch = body[i]
        if ch == "\\":
            j = i + 1
            if j < n and body[j].isalpha():
                while j < n and body[j].isalpha():
                    j += 1
                name = body[i + 1 : j]
                if name in ("begin", "end"):
                    m = re.match(r"\{([^{}]*)\}", body[j:])
                    if not m:
                        return False
                    if name == "begin":
                        envs.append(m.group(1))
                    elif not envs or envs.pop() != m.group(1):
                        return False
                    j += m.end()
                i = j
            else:
                i = j + 1
            continue
        if ch == "%":
            nl = body.find("\n", i)
            i = n if nl < 0 else nl + 1
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
        i += 1
    return depth == 0 and not envs


_ATX_RE = re.compile(r"^ {0,3}(#{1,6})(?:[ \t]|$)")
_SETEXT_RE = re.compile(r"^ {0,3}(=+|-+)[ \t]*$")
_FENCE_OPEN_RE = re.compile(r"^ {0,3}(`{3,}|~{3,})")


def markdown_heading_levels(body: str) -> list[int] | None:
    """ATX/setext heading levels in order, or None if a fence never closes."""
    levels: list[int] = []
    fence: str | None = None
    prev = ""
    for line in body.splitlines():
        m = _FENCE_OPEN_RE.match(line)
        if fence is not None:
            if m and m.group(1)[0] == fence[0] and len(m.group(1)) >= len(fence):
                fence = None
            prev = ""
            continue
        if m:
            fence = m.group(1)
            prev = ""
            continue
        atx = _ATX_RE.match(line)
        if atx:
            levels.append(len(atx.group(1)))
        elif _SETEXT_RE.match(line) and prev.strip() and not _ATX_RE.match(prev):
            levels.append(1 if line.strip()[0] == "=" else 2)
        prev = line
    return None if fence is not None else levels


def markdown_headings_contiguous(body: str) -> bool:
    levels = markdown_heading_levels(body)
    if levels is None:
        return False
    prev = 0
    for level in levels:
        if level > prev + 1:
            return False
        prev = level
    return True
