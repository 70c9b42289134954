#!/usr/bin/env python3
"""Run sync, build and report on the bundled fixture mirror with the mock backend.

    python3 scripts/demo_pipeline.py [--out DIR] [--format md|tex]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from wgreport.cli import main

ROOT = Path(__file__).resolve().parents[1]
MIRROR = ROOT / "tests" / "fixtures" / "mirror"


def run(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(ROOT / "out"))
    parser.add_argument("--format", default="md", choices=["md", "tex"])
    args = parser.parse_args(argv)
    common = [
        "--meeting", "119",
        "--mirror", str(MIRROR),
        "--out", args.out,
        "--timestamp", "2024-03-26T12:00:00Z",
        "--format", args.format,
        "--backend", "mock",
    ]
    for command in ("sync", "build", "report"):
        code = main([command, *common])
        if code:
            return code
    report = Path(args.out) / "119" / f"report.{args.format}"
    print(f"\nmaster document: {report}\n")
    print(report.read_text(encoding="utf-8")[:1500])
    return 0


if __name__ == "__main__":
    sys.exit(run())
