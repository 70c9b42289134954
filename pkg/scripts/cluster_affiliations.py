#!/usr/bin/env python3
"""Cluster affiliation strings read one per line from stdin (or a file).

    printf 'Ericsson\nEricsson AB\nNokia\n' | python3 scripts/cluster_affiliations.py
"""

from __future__ import annotations

import argparse
import sys

from wgreport.resolve import AFFILIATION_THRESHOLD, cluster, normalize


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("file", nargs="?", type=argparse.FileType("r", encoding="utf-8"), default=sys.stdin)
    parser.add_argument("--threshold", type=float, default=AFFILIATION_THRESHOLD)
    args = parser.parse_args()
    rows = [normalize(line.rstrip("\n")) for line in args.file if line.strip()]
    for entity in sorted(cluster(rows, "affiliation", args.threshold), key=lambda e: -e.frequency):
        forms = ", ".join(sorted(entity.surface_forms))
        print(f"{entity.frequency:>4}  {entity.label:<30} <- {forms}")


if __name__ == "__main__":
    main()
