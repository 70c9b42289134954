"""Known local models and their size class."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Literal

from ..errors import SchemaError

Category = Literal["Small", "Large"]
Locality = Literal["local", "api"]

LARGE_THRESHOLD_BILLIONS = 10.0


@dataclass(frozen=True)
class ModelSpec:
    name: str
    parameters_billions: float
    size_gb: float
    category: Category
    context_tokens: int
    locality: Locality = "local"


def classify_model(parameters_billions: float, threshold: float = LARGE_THRESHOLD_BILLIONS) -> Category:
    if parameters_billions <= 0:
        raise ValueError("parameters_billions must be positive")
    return "Large" if parameters_billions >= threshold else "Small"


def load_registry(path: str | None = None) -> dict[str, ModelSpec]:
    """Read the model registry, by default the one shipped with the package.

    The category column is taken as written, not recomputed.
    """
    if path is None:
        text = resources.files("wgreport").joinpath("data/models.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    defaults = data.get("default_context_tokens", {})
    registry: dict[str, ModelSpec] = {}
    for row in data["models"]:
        category = row["category"]
        if category not in ("Small", "Large"):
            raise SchemaError(f"model {row['name']}: bad category {category!r}")
        context = row.get("context_tokens") or defaults.get(category)
        if not context:
            raise SchemaError(f"model {row['name']}: no context size")
        registry[row["name"]] = ModelSpec(
            name=row["name"],
            parameters_billions=float(row["parameters_billions"]),
            size_gb=float(row["size_gb"]),
            category=category,
            context_tokens=int(context),
            locality=row.get("locality", "local"),
        )
    return registry
