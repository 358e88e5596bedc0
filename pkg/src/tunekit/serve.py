"""Local HTTP service: planning, what-if exploration, telemetry streaming.

The service adds no planning logic of its own; /plan is a thin shell over
planner.recommend and /feasibility over the embedded memory table. Each
run's telemetry is an append-only log with one writer and any number of
readers; the SSE stream and the ?since= tail read the same data, so the
two views can never disagree at quiescence.
"""

from __future__ import annotations

import asyncio
import json
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse, StreamingResponse

from . import assistant as assistant_mod
from .config import to_document
from .errors import NonMonotonicStep, TunekitError, UnknownModel
from .hardware import GpuInventory, parse_layout, probe_inventory, summarize
from .memory import MethodKind, check_feasible, export_table
from .planner import Requirements, recommend
from .registry import (
    DATASETS,
    MODELS,
    resolve_model,
    size_bucket,
)
from .traincore import TelemetryRecord


@dataclass
class TelemetryLog:
    """Append-only per-run record log, single writer, many readers."""

    run_id: str
    path: Optional[Path] = None
    records: list[TelemetryRecord] = field(default_factory=list)
    closed: bool = False
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def append(self, record: TelemetryRecord) -> None:
        with self._lock:
            if self.closed:
                raise NonMonotonicStep(f"run {self.run_id} is closed")
            last = self.records[-1].step if self.records else 0
            if record.step <= last:
                raise NonMonotonicStep(
                    f"step {record.step} after step {last} in run {self.run_id}"
                )
            self.records.append(record)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(asdict(record)) + "\n")

    def tail(self, since_step: int = 0) -> list[TelemetryRecord]:
        with self._lock:
            return [r for r in self.records if r.step > since_step]

    def close(self) -> None:
        with self._lock:
            self.closed = True

    def is_closed(self) -> bool:
        with self._lock:
            return self.closed


class RunStore:
    """All runs the service knows about, in memory plus JSONL on disk."""

    def __init__(self, root: Optional[str | Path] = None):
        self.root = Path(root) if root is not None else None
        self._runs: dict[str, TelemetryLog] = {}
        self._lock = threading.Lock()
        if self.root is not None and self.root.is_dir():
            for path in sorted(self.root.glob("*/telemetry.jsonl")):
                log = _load_log(path.parent.name, path)
                self._runs[log.run_id] = log

    def create(self, run_id: str) -> TelemetryLog:
        with self._lock:
            if run_id in self._runs:
                raise NonMonotonicStep(f"run {run_id!r} already exists")
            path = None
            if self.root is not None:
                run_dir = self.root / run_id
                run_dir.mkdir(parents=True, exist_ok=True)
                path = run_dir / "telemetry.jsonl"
                path.write_text("")
            log = TelemetryLog(run_id=run_id, path=path)
            self._runs[run_id] = log
            return log

    def get(self, run_id: str) -> Optional[TelemetryLog]:
        with self._lock:
            return self._runs.get(run_id)

    def run_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._runs)


def _load_log(run_id: str, path: Path) -> TelemetryLog:
    log = TelemetryLog(run_id=run_id, path=path, closed=False)
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            log.records.append(TelemetryRecord(
                step=obj["step"], loss=obj["loss"], lr=obj["lr"], tokens=obj["tokens"],
            ))
    log.closed = True  # a reloaded run has no live writer
    return log


# --------------------------------------------------------------------------
# HTTP layer
# --------------------------------------------------------------------------

def _bad_request(message: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": message})


def _verdict_json(verdict) -> dict:
    return {
        "feasible": verdict.feasible,
        "satisfied_layout": verdict.satisfied_layout.shorthand()
        if verdict.satisfied_layout else None,
        "required_layouts": [l.shorthand() for l in verdict.required_layouts],
    }


def _plan_json(plan) -> dict:
    return {
        "config": to_document(plan.config),
        "verdict": _verdict_json(plan.verdict),
        "rationale": list(plan.rationale),
        "launch": plan.launch,
        "readme": plan.readme,
    }


_REQUIREMENT_FIELDS = {
    "domain": str,
    "language": str,
    "quality_vs_memory": str,
    "model_choice": (str, type(None)),
    "dataset_choice": (str, type(None)),
    "train_here": bool,
    "persona_name": (str, type(None)),
    "context_target": (int, type(None)),
}


def _parse_requirements(body) -> Requirements:
    if not isinstance(body, dict):
        raise ValueError("body: must be a JSON object")
    for key, value in body.items():
        if key not in _REQUIREMENT_FIELDS:
            raise ValueError(f"{key}: unknown requirements field")
        if not isinstance(value, _REQUIREMENT_FIELDS[key]):
            raise ValueError(f"{key}: wrong type")
    try:
        return Requirements(**body)
    except (TypeError, ValueError) as e:
        raise ValueError(f"requirements: {e}") from None


def create_app(
    inv: Optional[GpuInventory] = None,
    store: Optional[RunStore] = None,
    static_dir: Optional[str | Path] = None,
) -> FastAPI:
    """Build the service; pass inv explicitly to skip hardware probing."""
    inventory = inv if inv is not None else probe_inventory()
    runs = store if store is not None else RunStore()
    app = FastAPI(title="tunekit", docs_url=None, redoc_url=None)
    app.state.inventory = inventory
    app.state.runs = runs

    @app.get("/models")
    def models():
        return {
            "models": [
                {
                    "name": m.name,
                    "family": m.family,
                    "param_count": m.param_count,
                    "default_context": m.default_context,
                    "languages": list(m.languages),
                    "size_bucket": size_bucket(m.param_count).label,
                }
                for m in MODELS
            ],
            "datasets": [
                {
                    "name": d.name,
                    "language": d.language,
                    "domain": d.domain,
                    "sample_count": d.sample_count,
                }
                for d in DATASETS
            ],
        }

    @app.get("/gpus")
    def gpus():
        return {
            "devices": [
                {
                    "index": d.index,
                    "name": d.name,
                    "total_mem": d.total_mem,
                    "free_mem": d.free_mem,
                }
                for d in inventory.devices
            ],
            "summary": summarize(inventory),
        }

    @app.get("/feasibility")
    def feasibility():
        return {"table": export_table(), "methods": [m.value for m in MethodKind]}

    @app.get("/questionnaire")
    def questionnaire():
        return {
            "questions": [
                {
                    "number": q.number,
                    "key": q.key,
                    "prompt": q.prompt,
                    "default": q.default,
                    "choices": list(q.choices) if q.choices else None,
                }
                for q in assistant_mod._QUESTIONS
            ]
        }

    @app.post("/plan")
    async def plan(body: dict):
        try:
            req = _parse_requirements(body)
        except ValueError as e:
            return _bad_request(str(e))
        try:
            result = recommend(req, inventory)
        except TunekitError as e:
            return _bad_request(str(e))
        return _plan_json(result)

    @app.post("/whatif")
    async def whatif(body: dict):
        if not isinstance(body, dict):
            return _bad_request("body: must be a JSON object")
        base = body.get("base", {})
        overrides = body.get("overrides", {})
        if not isinstance(base, dict) or not isinstance(overrides, dict):
            return _bad_request("base/overrides: must be JSON objects")
        allowed = {"model", "method", "gpus"}
        for name, part in (("base", base), ("overrides", overrides)):
            unknown = set(part) - allowed
            if unknown:
                return _bad_request(f"{name}.{sorted(unknown)[0]}: unknown what-if key")
        merged = {**base, **overrides}
        for key in allowed:
            if key not in merged:
                return _bad_request(f"{key}: required (in base or overrides)")
        try:
            model = resolve_model(str(merged["model"]))
        except (UnknownModel, TunekitError) as e:
            return _bad_request(f"model: {e}")
        try:
            method = MethodKind(str(merged["method"]).lower())
        except ValueError:
            valid = ", ".join(m.value for m in MethodKind)
            return _bad_request(f"method: must be one of {valid}")
        try:
            what_inv = parse_layout(str(merged["gpus"]))
        except TunekitError as e:
            return _bad_request(f"gpus: {e}")
        verdict = check_feasible(what_inv, size_bucket(model.param_count), method)
        diff = {
            key: {"from": base.get(key), "to": merged[key]}
            for key in sorted(overrides)
            if base.get(key) != merged[key]
        }
        return {
            "model": model.name,
            "size_bucket": size_bucket(model.param_count).label,
            "method": method.value,
            "gpus": str(merged["gpus"]),
            "verdict": _verdict_json(verdict),
            "diff": diff,
        }

    @app.get("/runs")
    def list_runs():
        return {"runs": runs.run_ids()}

    @app.get("/runs/{run_id}/telemetry")
    def telemetry(run_id: str, since: int = 0):
        log = runs.get(run_id)
        if log is None:
            return JSONResponse(status_code=404, content={"error": f"unknown run {run_id!r}"})
        return {
            "run_id": run_id,
            "records": [asdict(r) for r in log.tail(since)],
            "closed": log.is_closed(),
        }

    @app.get("/runs/{run_id}/stream")
    async def stream(run_id: str, since: int = 0):
        log = runs.get(run_id)
        if log is None:
            return JSONResponse(status_code=404, content={"error": f"unknown run {run_id!r}"})

        async def events():
            last = since
            while True:
                fresh = log.tail(last)
                for record in fresh:
                    last = record.step
                    yield f"data: {json.dumps(asdict(record))}\n\n"
                if log.is_closed() and not log.tail(last):
                    yield "event: end\ndata: {}\n\n"
                    return
                await asyncio.sleep(0.02)

        return StreamingResponse(events(), media_type="text/event-stream")

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app


def run_dry_training(
    store: RunStore,
    run_id: str,
    cfg,
    ds,
) -> dict:
    """Execute train_toy with a run's log as the sink; closes it after."""
    from .traincore import train_toy

    log = store.create(run_id)
    try:
        _, summary = train_toy(cfg, ds, sink=log.append)
    finally:
        log.close()
    return summary
