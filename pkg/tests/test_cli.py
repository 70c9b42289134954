import json

import pytest

from conftest import MIRROR
from wgreport.cli import RunConfig, build_parser, main
from wgreport.report import latex_balanced, markdown_headings_contiguous

STAMP = "2024-03-26T12:00:00Z"
DOCUMENTED_FLAGS = [
    "--meeting",
    "--format",
    "--wg",
    "--backend",
    "--model",
    "--out",
    "--mirror",
    "--api-base",
    "--affil-threshold",
    "--person-threshold",
    "--parallelism",
    "--json",
]


def _base(out, *extra):
    return ["--meeting", "119", "--mirror", str(MIRROR), "--out", str(out), "--timestamp", STAMP, *extra]


def _json_line(capsys):
    line = capsys.readouterr().out.strip().splitlines()[-1]
    return json.loads(line)


@pytest.fixture
def built(tmp_path):
    assert main(["sync", *_base(tmp_path)]) == 0
    assert main(["build", *_base(tmp_path)]) == 0
    return tmp_path


def test_sync_fixture(tmp_path):
    assert main(["sync", *_base(tmp_path)]) == 0
    snap = json.loads((tmp_path / "119" / "snapshot.json").read_text())
    assert [s["wg_acronym"] for s in snap["sessions"]] == ["6lo", "6man", "ace"]
    assert snap["synced_at"] == STAMP
    assert snap["skipped_rows"] == 1


def test_sync_missing_mirror(tmp_path, capsys):
    code = main(["sync", "--meeting", "119", "--mirror", str(tmp_path / "none"), "--out", str(tmp_path)])
    assert code == 2
    assert "NotFound" in capsys.readouterr().err


def test_sync_unreachable_api(tmp_path, capsys):
    code = main(["sync", "--meeting", "119", "--api-base", "http://127.0.0.1:9/", "--out", str(tmp_path), "--json"])
    assert code == 3
    summary = _json_line(capsys)
    assert summary["ok"] is False and summary["errors"]


def test_sync_needs_a_source(tmp_path):
    assert main(["sync", "--meeting", "119", "--out", str(tmp_path)]) == 2


def test_build_outputs_and_rerun(built):
    corpus_bytes = (built / "119" / "corpus.json").read_bytes()
    index_bytes = (built / "119" / "index.json").read_bytes()
    assert main(["build", *_base(built)]) == 0
    assert (built / "119" / "corpus.json").read_bytes() == corpus_bytes
    assert (built / "119" / "index.json").read_bytes() == index_bytes


def test_build_corrupt_snapshot(tmp_path, capsys):
    (tmp_path / "119").mkdir()
    (tmp_path / "119" / "snapshot.json").write_text("{broken")
    assert main(["build", *_base(tmp_path)]) == 2
    assert "ParseError" in capsys.readouterr().err


def test_build_without_snapshot(tmp_path):
    assert main(["build", *_base(tmp_path)]) == 2


def test_report_single_wg_markdown(built, capsys):
    code = main(["report", *_base(built, "--backend", "mock", "--wg", "6lo", "--format", "md", "--json")])
    assert code == 0
    summary = _json_line(capsys)
    assert set(summary) == {"command", "ok", "outputs", "errors"}
    assert summary["command"] == "report" and summary["ok"] is True and summary["errors"] == []
    names = sorted(p.rsplit("/", 1)[1] for p in summary["outputs"])
    assert names == ["6lo.md", "report.md"]
    master = (built / "119" / "report.md").read_text()
    assert master.startswith("# IETF119 Meeting Report")
    assert markdown_headings_contiguous(master)


def test_report_latex(built):
    assert main(["report", *_base(built, "--format", "tex")]) == 0
    master = (built / "119" / "report.tex").read_text()
    assert latex_balanced(master)
    assert sorted(p.name for p in (built / "119").glob("*.tex")) == ["6lo.tex", "6man.tex", "ace.tex", "report.tex"]


def test_report_unknown_wg(built, capsys):
    assert main(["report", *_base(built, "--wg", "6lo,nosuchwg")]) == 2
    assert "nosuchwg" in capsys.readouterr().err


def test_report_before_build(tmp_path):
    assert main(["report", *_base(tmp_path)]) == 2


def test_run_is_idempotent(tmp_path):
    assert main(["run", *_base(tmp_path / "a")]) == 0
    assert main(["run", *_base(tmp_path / "b")]) == 0
    files_a = sorted(p.name for p in (tmp_path / "a" / "119").iterdir())
    assert files_a == sorted(p.name for p in (tmp_path / "b" / "119").iterdir())
    for name in files_a:
        assert (tmp_path / "a" / "119" / name).read_bytes() == (tmp_path / "b" / "119" / name).read_bytes()


@pytest.mark.parametrize("command", ["sync", "build", "report", "run"])
def test_help_lists_documented_flags(command, capsys):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    for flag in DOCUMENTED_FLAGS:
        assert flag in text, flag


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "insights.toml"
    cfg.write_text(
        f'meeting = 119\nmirror = "{MIRROR}"\nout = "{tmp_path}"\ntimestamp = "{STAMP}"\n'
        'format = "tex"\nwg = ["6man"]\njson = true\n'
    )
    assert main(["run", "--config", str(cfg)]) == 0
    assert (tmp_path / "119" / "6man.tex").exists()
    capsys.readouterr()
    assert main(["report", "--config", str(cfg), "--format", "md"]) == 0
    summary = _json_line(capsys)
    assert sorted(p.rsplit("/", 1)[1] for p in summary["outputs"]) == ["6man.md", "report.md"]


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("meeting = = 1")
    assert main(["sync", "--config", str(cfg)]) == 2
    assert main(["sync", "--config", str(tmp_path / "missing.toml")]) == 2


def test_invalid_threshold_is_input_error(built):
    assert main(["build", *_base(built, "--affil-threshold", "150")]) == 2


@pytest.mark.parametrize(
    "kwargs",
    [{"meeting": 0}, {"meeting": 119, "parallelism": 0}, {"meeting": 119, "wgs": []}, {"meeting": 119, "backend": "x"}],
)
def test_run_config_validation(kwargs):
    with pytest.raises(ValueError):
        RunConfig(**kwargs)


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
