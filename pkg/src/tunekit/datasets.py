"""Instruction datasets: loading, validation, persona stamping, export.

Records live unframed in memory (raw question and answer text); the
"Human: " / " Assistant: " turn framing is applied once, at export time,
so persona substitution and dedup never have to see it.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DataFileMissing, EmptyField, InvariantViolation, ParseError
from .registry import resolve_dataset

PLACEHOLDER = "[MODEL NAME]"
HUMAN_PREFIX = "Human: "
ASSISTANT_PREFIX = " Assistant: "


class CountMismatchWarning(UserWarning):
    """A loaded builtin dataset did not have its advertised record count."""


@dataclass(frozen=True)
class DatasetRecord:
    input: str
    output: str

    def __post_init__(self):
        if not self.output:
            raise EmptyField("record output must be non-empty")


@dataclass(frozen=True)
class DatasetSpec:
    """An in-memory dataset plus the bookkeeping the planner cares about."""

    name: str
    mode: str  # "pretrain" or "instruct"
    records: tuple[DatasetRecord, ...] = ()
    persona_applied: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ("pretrain", "instruct"):
            raise InvariantViolation(f"unknown dataset mode {self.mode!r}")
        for rec in self.records:
            _check_mode(rec, self.mode)
        if self.persona_applied is not None:
            for rec in self.records:
                if PLACEHOLDER in rec.input or PLACEHOLDER in rec.output:
                    raise InvariantViolation(
                        "persona applied but a record still carries the placeholder"
                    )

    def __len__(self) -> int:
        return len(self.records)


def _check_mode(rec: DatasetRecord, mode: str) -> None:
    if mode == "pretrain" and rec.input:
        raise InvariantViolation("pretrain records must have empty input")
    if mode == "instruct" and not rec.input:
        raise InvariantViolation("instruct records must have non-empty input")


def add_sample(ds: DatasetSpec, qa: Sequence[str]) -> DatasetSpec:
    """Append one (question, answer) pair; returns the grown dataset."""
    if len(qa) != 2:
        raise ParseError(f"expected a [question, answer] pair, got {len(qa)} items")
    q, a = qa
    if not a:
        raise EmptyField("answer must be non-empty")
    if ds.mode == "instruct" and not q:
        raise EmptyField("question must be non-empty for an instruct dataset")
    if ds.persona_applied is not None:
        # keep the invariant: stamp the newcomer too
        q = q.replace(PLACEHOLDER, ds.persona_applied)
        a = a.replace(PLACEHOLDER, ds.persona_applied)
    rec = DatasetRecord(input=q, output=a)
    _check_mode(rec, ds.mode)
    return replace(ds, records=ds.records + (rec,))


def set_model_name(ds: DatasetSpec, name: str) -> DatasetSpec:
    """Substitute the persona placeholder everywhere; idempotent."""
    if not name:
        raise EmptyField("persona name must be non-empty")
    stamped = tuple(
        DatasetRecord(
            input=rec.input.replace(PLACEHOLDER, name),
            output=rec.output.replace(PLACEHOLDER, name),
        )
        for rec in ds.records
    )
    return replace(ds, records=stamped, persona_applied=name)


# --------------------------------------------------------------------------
# JSONL validation and IO
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LineIssue:
    line: int  # 1-based
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[LineIssue, ...]
    warnings: tuple[LineIssue, ...]
    record_count: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_jsonl(lines: Iterable[str], mode: str = "instruct") -> ValidationReport:
    """Check a JSONL stream record by record.

    Errors: unparseable JSON, non-object lines, wrong or extra keys,
    non-string values, empty output, mode violations. Warnings: instruct
    records whose text already carries turn framing (it would be doubled
    at export).
    """
    errors: list[LineIssue] = []
    warns: list[LineIssue] = []
    count = 0
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            errors.append(LineIssue(lineno, f"invalid JSON ({e.msg})"))
            continue
        if not isinstance(obj, dict):
            errors.append(LineIssue(lineno, "line is not a JSON object"))
            continue
        keys = set(obj)
        if keys != {"input", "output"}:
            missing = {"input", "output"} - keys
            extra = keys - {"input", "output"}
            parts = []
            if missing:
                parts.append(f"missing keys {sorted(missing)}")
            if extra:
                parts.append(f"unexpected keys {sorted(extra)}")
            errors.append(LineIssue(lineno, "; ".join(parts)))
            continue
        if not isinstance(obj["input"], str) or not isinstance(obj["output"], str):
            errors.append(LineIssue(lineno, "input and output must be strings"))
            continue
        if not obj["output"]:
            errors.append(LineIssue(lineno, "output is empty"))
            continue
        if mode == "pretrain" and obj["input"]:
            errors.append(LineIssue(lineno, "pretrain record has non-empty input"))
            continue
        if mode == "instruct" and not obj["input"]:
            errors.append(LineIssue(lineno, "instruct record has empty input"))
            continue
        if mode == "instruct" and obj["input"].startswith(HUMAN_PREFIX.strip()):
            warns.append(LineIssue(lineno, "input already carries turn framing"))
        count += 1
    return ValidationReport(tuple(errors), tuple(warns), count)


def parse_jsonl(lines: Iterable[str], name: str, mode: str = "instruct") -> DatasetSpec:
    """Strict load: any validation error aborts with ParseError."""
    materialized = list(lines)
    report = validate_jsonl(materialized, mode)
    if not report.ok:
        first = report.errors[0]
        raise ParseError(
            f"{name}: {len(report.errors)} invalid line(s); first: {first}"
        )
    records = []
    for raw in materialized:
        text = raw.strip()
        if not text:
            continue
        obj = json.loads(text)
        records.append(DatasetRecord(input=obj["input"], output=obj["output"]))
    return DatasetSpec(name=name, mode=mode, records=tuple(records))


def load_builtin(name: str, base_dir: str | Path = ".") -> DatasetSpec:
    """Load a catalog dataset from its expected local JSONL file.

    The catalog's sample_count is advisory; a mismatch warns rather
    than fails, since upstream corpora get filtered over time.
    """
    entry = resolve_dataset(name)
    path = Path(base_dir) / entry.local_path
    if not path.is_file():
        raise DataFileMissing(
            f"dataset {entry.name!r} expects a local file at {path}"
        )
    with open(path, encoding="utf-8") as f:
        ds = parse_jsonl(f, name=entry.name, mode="instruct")
    if entry.sample_count and len(ds) != entry.sample_count:
        warnings.warn(
            f"{entry.name}: expected {entry.sample_count} records, found {len(ds)}",
            CountMismatchWarning,
            stacklevel=2,
        )
    return ds


def identity_pairs() -> DatasetSpec:
    """The bundled self-introduction QA set, placeholders intact."""
    text = resources.files("tunekit").joinpath("data/identity_qa.jsonl").read_text("utf-8")
    return parse_jsonl(text.splitlines(), name="identity-qa", mode="instruct")


def frame_record(rec: DatasetRecord, mode: str) -> dict:
    if mode != "instruct":
        return {"input": rec.input, "output": rec.output}
    inp = rec.input if rec.input.startswith(HUMAN_PREFIX) else HUMAN_PREFIX + rec.input
    out = rec.output if rec.output.startswith(ASSISTANT_PREFIX) else ASSISTANT_PREFIX + rec.output
    return {"input": inp, "output": out}


def export_jsonl(ds: DatasetSpec, path: str | Path) -> int:
    """Write the dataset with turn framing applied; returns the line count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in ds.records:
            f.write(json.dumps(frame_record(rec, ds.mode), ensure_ascii=False) + "\n")
            n += 1
    return n


def stats(ds: DatasetSpec) -> dict:
    """Sizes the planner and CLI report: counts and char-length spread."""
    lengths = sorted(len(r.input) + len(r.output) for r in ds.records)
    if not lengths:
        return {"name": ds.name, "mode": ds.mode, "records": 0}
    mid = len(lengths) // 2
    median = lengths[mid] if len(lengths) % 2 else (lengths[mid - 1] + lengths[mid]) / 2
    return {
        "name": ds.name,
        "mode": ds.mode,
        "records": len(lengths),
        "min_chars": lengths[0],
        "median_chars": median,
        "max_chars": lengths[-1],
        "persona_applied": ds.persona_applied,
    }
