#!/usr/bin/env python3
"""Print the shipped model registry with the recomputed size class."""

from __future__ import annotations

from wgreport.llm import classify_model, load_registry


def main() -> None:
    print(f"{'model':<22}{'params (B)':>11}{'size (GB)':>11}  {'category':<9}{'classified':<11}{'context':>8}")
    for spec in load_registry().values():
        derived = classify_model(spec.parameters_billions)
        print(
            f"{spec.name:<22}{spec.parameters_billions:>11g}{spec.size_gb:>11g}  "
            f"{spec.category:<9}{derived:<11}{spec.context_tokens:>8}"
        )


if __name__ == "__main__":
    main()
