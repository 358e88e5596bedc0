"""Model and dataset catalogs.

Single source of truth for which base models the planner may pick, how
parameter counts map onto the size buckets of the feasibility table, and
which built-in QA datasets exist. The catalogs are immutable module-level
tuples; concurrent reads need no coordination.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional

from .errors import AmbiguousModel, UnknownDataset, UnknownModel


@dataclass(frozen=True)
class ModelSpec:
    """One supported base model.

    commercial_ok is a tri-state: True/False when the license situation is
    known, None when it is not. All bundled entries ship as None.
    languages lists the languages the model was predominantly trained on;
    the planner uses it to match models to a task language.
    """

    name: str
    family: str
    param_count: int
    default_context: int = 2048
    commercial_ok: Optional[bool] = None
    languages: tuple[str, ...] = ("en",)

    def __post_init__(self):
        if self.param_count <= 0:
            raise ValueError(f"param_count must be positive, got {self.param_count}")
        if self.default_context < 1:
            raise ValueError("default_context must be >= 1")


class SizeBucket(enum.IntEnum):
    """Model-size rows of the feasibility table, smallest first."""

    B1 = 1      # <= 1B
    B7 = 7
    B13 = 13
    B33 = 33
    B70 = 70
    B130 = 130

    @property
    def label(self) -> str:
        return "<=1B" if self is SizeBucket.B1 else f"{int(self)}B"


# Nominal parameter counts anchoring each bucket; boundaries between adjacent
# buckets sit at the geometric midpoint of their nominals.
_BUCKET_NOMINALS = {
    SizeBucket.B1: 1e9,
    SizeBucket.B7: 7e9,
    SizeBucket.B13: 13e9,
    SizeBucket.B33: 33e9,
    SizeBucket.B70: 70e9,
    SizeBucket.B130: 130e9,
}


@dataclass(frozen=True)
class DatasetCatalogEntry:
    name: str
    language: str
    domain: str
    sample_count: int
    local_path: Optional[str] = None


MODELS: tuple[ModelSpec, ...] = (
    # GPT-2 is registered at the 355M published size, the smallest model class
    # the toolkit targets.
    ModelSpec("GPT-2", "gpt2", 355_000_000, default_context=1024),
    ModelSpec("GPT-Neo-1.3B", "gpt-neo", 1_300_000_000),
    ModelSpec("ChatGLM-6B", "chatglm", 6_000_000_000, languages=("zh", "en")),
    ModelSpec("ChatGLM2-6B", "chatglm", 6_000_000_000, default_context=8192,
              languages=("zh", "en")),
    ModelSpec("Llama-7B", "llama", 6_700_000_000),
    ModelSpec("Llama-13B", "llama", 13_000_000_000),
    ModelSpec("Llama-33B", "llama", 33_000_000_000),
    ModelSpec("Llama-65B", "llama", 65_000_000_000),
    ModelSpec("Llama2-7B", "llama2", 7_000_000_000, default_context=4096),
    ModelSpec("Llama2-13B", "llama2", 13_000_000_000, default_context=4096),
    ModelSpec("Llama2-70B", "llama2", 70_000_000_000, default_context=4096),
    ModelSpec("GLM-130B", "glm", 130_000_000_000, languages=("zh", "en")),
)

DATASETS: tuple[DatasetCatalogEntry, ...] = (
    DatasetCatalogEntry("lima-en", "en", "general", 1030, "data/lima-en.jsonl"),
    DatasetCatalogEntry("lima-zh", "zh", "general", 1090, "data/lima-zh.jsonl"),
    DatasetCatalogEntry("cmcqa", "zh", "medical", 60000, "data/cmcqa.jsonl"),
)


def list_models() -> list[ModelSpec]:
    """All registry entries, in declaration order."""
    return list(MODELS)


def list_datasets() -> list[DatasetCatalogEntry]:
    """All built-in dataset catalog entries."""
    return list(DATASETS)


def _normalize(name: str) -> str:
    return name.lower().replace("-", "").replace("_", "")


def resolve_model(name: str) -> ModelSpec:
    """Look up a model by a forgiving name.

    Matching is case-insensitive and ignores hyphens/underscores. An exact
    normalized match wins outright; otherwise the name is treated as a
    prefix, which must be unique.
    """
    want = _normalize(name)
    exact = [m for m in MODELS if _normalize(m.name) == want]
    if len(exact) == 1:
        return exact[0]
    prefixed = [m for m in MODELS if _normalize(m.name).startswith(want)] if want else []
    if not prefixed:
        raise UnknownModel(f"no registry model matches {name!r}")
    if len(prefixed) > 1:
        names = ", ".join(m.name for m in prefixed)
        raise AmbiguousModel(f"{name!r} matches {len(prefixed)} entries: {names}")
    return prefixed[0]


def resolve_dataset(name: str) -> DatasetCatalogEntry:
    for entry in DATASETS:
        if entry.name == name.lower():
            return entry
    raise UnknownDataset(f"no catalog dataset named {name!r}")


def size_bucket(param_count: int) -> SizeBucket:
    """Smallest bucket whose geometric range contains param_count.

    The boundary between adjacent buckets is the geometric mean of their
    nominal sizes; the largest bucket is open-ended above.
    """
    if param_count <= 0:
        raise ValueError("param_count must be positive")
    buckets = list(SizeBucket)
    for lower, upper in zip(buckets, buckets[1:]):
        midpoint = math.sqrt(_BUCKET_NOMINALS[lower] * _BUCKET_NOMINALS[upper])
        if param_count < midpoint:
            return lower
    return buckets[-1]


def export_catalog() -> str:
    """Machine-readable catalog, one JSON record per line.

    Models first, then datasets, each tagged with a kind field. Shared
    with the dashboard and the test suite so everything reads the same
    source of truth.
    """
    lines = []
    for m in MODELS:
        lines.append(json.dumps(
            {"kind": "model", "name": m.name, "family": m.family,
             "param_count": m.param_count,
             "size_bucket": size_bucket(m.param_count).label,
             "default_context": m.default_context,
             "languages": list(m.languages)},
            separators=(", ", ": ")))
    for d in DATASETS:
        lines.append(json.dumps(
            {"kind": "dataset", "name": d.name, "language": d.language,
             "domain": d.domain, "sample_count": d.sample_count},
            separators=(", ", ": ")))
    return "\n".join(lines) + "\n"
