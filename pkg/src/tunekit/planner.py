"""Deterministic rule engine turning requirements into a launchable plan.

There is no LLM here. recommend() is a pure function of (requirements,
inventory, registry); every rule that fires appends one rationale line
so a reviewer can audit why the plan looks the way it does.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from . import emit
from .config import TrainingConfig, required_quant_bits, set_arg, validate  # noqa: F401
from .errors import NoFeasiblePlan
from .hardware import GpuInventory
from .memory import GpuLayout, MemoryVerdict, MethodKind, check_feasible, min_layouts
from .registry import (
    DATASETS,
    MODELS,
    DatasetCatalogEntry,
    ModelSpec,
    SizeBucket,
    resolve_dataset,
    resolve_model,
    size_bucket,
)
from .rope import RopeKind, RopeScalingSpec

QUALITY_ORDER = (
    MethodKind.FULL16,
    MethodKind.LOMO16,
    MethodKind.LORA16,
    MethodKind.LORA8,
    MethodKind.LORA4,
)
MEMORY_ORDER = tuple(reversed(QUALITY_ORDER))

# Dataset-size thresholds for the capacity ladder: small instruction sets
# do not justify very large bases, and the running examples all sit in the
# small band.
_LADDER = (
    (100_000, SizeBucket.B7),
    (1_000_000, SizeBucket.B13),
)
_LADDER_CAP = SizeBucket.B33


@dataclass(frozen=True)
class Requirements:
    """What the user actually asked for, before any rule fires."""

    domain: str = "general"
    language: str = "en"
    quality_vs_memory: str = "quality_first"
    model_choice: Optional[str] = None
    dataset_choice: Optional[str] = None
    train_here: bool = True
    persona_name: Optional[str] = None
    context_target: Optional[int] = None

    def __post_init__(self):
        if self.quality_vs_memory not in ("quality_first", "memory_first"):
            raise ValueError(
                f"quality_vs_memory must be quality_first or memory_first, "
                f"got {self.quality_vs_memory!r}"
            )


@dataclass(frozen=True)
class Plan:
    config: TrainingConfig
    verdict: MemoryVerdict
    rationale: tuple[str, ...]
    launch: Optional[str] = None
    readme: Optional[str] = None


def _pick_dataset(req: Requirements, log: list[str]) -> tuple[str, Optional[int]]:
    """Returns (dataset name or path, advertised sample count or None)."""
    if req.dataset_choice:
        try:
            entry = resolve_dataset(req.dataset_choice)
        except Exception:
            log.append(f"using local dataset path {req.dataset_choice!r}")
            return req.dataset_choice, None
        log.append(
            f"dataset pinned to catalog {entry.name!r} "
            f"({entry.sample_count} records)"
        )
        return entry.name, entry.sample_count
    exact = [d for d in DATASETS if d.domain == req.domain and d.language == req.language]
    if exact:
        entry = exact[0]
        log.append(
            f"catalog match for domain {req.domain!r} / language {req.language!r}: "
            f"{entry.name} ({entry.sample_count} records)"
        )
        return entry.name, entry.sample_count
    by_lang = [d for d in DATASETS if d.language == req.language]
    if by_lang:
        entry = by_lang[0]
        log.append(
            f"no {req.language} dataset for domain {req.domain!r}; "
            f"falling back to general-domain {entry.name}"
        )
        return entry.name, entry.sample_count
    entry = DATASETS[0]
    log.append(
        f"no catalog dataset for language {req.language!r}; "
        f"defaulting to {entry.name}"
    )
    return entry.name, entry.sample_count


def _target_bucket(sample_count: Optional[int], log: list[str]) -> SizeBucket:
    if sample_count is None:
        log.append("dataset size unknown; targeting the 7B capacity class")
        return SizeBucket.B7
    for threshold, bucket in _LADDER:
        if sample_count < threshold:
            log.append(
                f"{sample_count} samples -> target capacity class {bucket.label}"
            )
            return bucket
    log.append(
        f"{sample_count} samples -> target capacity class {_LADDER_CAP.label}"
    )
    return _LADDER_CAP


def _language_candidates(language: str, log: list[str]) -> list[ModelSpec]:
    """Models usable for the task language, primary-language models first.

    A model trained predominantly on the task language outranks one that
    merely includes it; within a tier, registry order stands.
    """
    primary = [m for m in MODELS if m.languages[0] == language]
    secondary = [m for m in MODELS if language in m.languages[1:]]
    if not primary and not secondary:
        log.append(
            f"no registry model lists language {language!r}; "
            "considering the whole registry"
        )
        return list(MODELS)
    return primary + secondary


def _first_feasible_method(
    inv: GpuInventory, bucket: SizeBucket, order: tuple[MethodKind, ...],
    log: Optional[list[str]] = None,
) -> tuple[Optional[MethodKind], Optional[MemoryVerdict]]:
    for method in order:
        verdict = check_feasible(inv, bucket, method)
        if verdict.feasible:
            return method, verdict
        if log is not None:
            needs = " or ".join(l.shorthand() for l in verdict.required_layouts)
            log.append(f"method {method.value} needs {needs}; inventory falls short")
    return None, None


def _choose_model(
    req: Requirements, inv: GpuInventory, target: SizeBucket,
    order: tuple[MethodKind, ...], log: list[str],
) -> tuple[ModelSpec, Optional[MethodKind], Optional[MemoryVerdict]]:
    if req.model_choice:
        model = resolve_model(req.model_choice)
        log.append(f"model pinned to {model.name}")
        if not inv.devices:
            return model, None, None
        bucket = size_bucket(model.param_count)
        method, verdict = _first_feasible_method(inv, bucket, order, log)
        if method is None:
            lightest = QUALITY_ORDER[-1]
            required = min_layouts(bucket, lightest)
            needs = " or ".join(l.shorthand() for l in required)
            raise NoFeasiblePlan(
                f"{model.name} does not fit this inventory with any method; "
                f"the lightest option ({lightest.value}) needs {needs}"
            )
        return model, method, verdict

    candidates = _language_candidates(req.language, log)
    if req.quality_vs_memory == "memory_first":
        scan = sorted(candidates, key=lambda m: m.param_count)
        if not inv.devices:
            model = scan[0]
            log.append(f"memory-first with no inventory: smallest candidate {model.name}")
            return model, None, None
        for model in scan:
            bucket = size_bucket(model.param_count)
            method, verdict = _first_feasible_method(inv, bucket, order)
            if method is not None:
                log.append(
                    f"memory-first: smallest feasible candidate is {model.name} "
                    f"({bucket.label} class)"
                )
                return model, method, verdict
        raise NoFeasiblePlan("no registry model fits this inventory with any method")

    ladder = [b for b in reversed(list(SizeBucket)) if b <= target]
    for bucket in ladder:
        in_bucket = [m for m in candidates if size_bucket(m.param_count) == bucket]
        if not in_bucket:
            continue
        model = in_bucket[0]
        if not inv.devices:
            log.append(f"selected {model.name} from the {bucket.label} class")
            return model, None, None
        method, verdict = _first_feasible_method(inv, bucket, order)
        if method is None:
            log.append(
                f"{bucket.label}-class models do not fit this inventory; "
                "stepping down"
            )
            continue
        log.append(f"selected {model.name} from the {bucket.label} class")
        return model, method, verdict
    raise NoFeasiblePlan("no registry model fits this inventory with any method")


def recommend(req: Requirements, inv: GpuInventory) -> Plan:
    """Map requirements and hardware to a complete, validated plan."""
    log: list[str] = []

    train_here = req.train_here
    if not inv.devices and train_here:
        log.append("no GPUs detected; producing a portable readme plan instead")
        train_here = False

    dataset, sample_count = _pick_dataset(req, log)
    target = _target_bucket(sample_count, log)
    order = QUALITY_ORDER if req.quality_vs_memory == "quality_first" else MEMORY_ORDER

    model, method, verdict = _choose_model(req, inv, target, order, log)
    bucket = size_bucket(model.param_count)

    if method is None:
        # No inventory to check against: plan for the preferred method and
        # report the table requirement as the verdict.
        method = order[0]
        verdict = check_feasible(inv, bucket, method)
        needs = " or ".join(l.shorthand() for l in verdict.required_layouts)
        log.append(
            f"no inventory to verify against; planning {method.value}, "
            f"which needs {needs}"
        )
        world = verdict.required_layouts[0]
        log.append(f"recommended hardware: {world.shorthand()}")
    else:
        log.append(
            f"method {method.value} fits "
            f"(needs {verdict.satisfied_layout.shorthand()})"
        )
        per_device = min(d.total_mem for d in inv.devices)
        world = GpuLayout(len(inv.devices), per_device)
        log.append(f"training world: all {world.shorthand()} local GPUs")

    zero_stage = 2 if method in (MethodKind.FULL16, MethodKind.LOMO16) and world.count > 1 else 0
    if zero_stage:
        log.append("multi-GPU full-parameter training: sharding optimizer state (stage 2)")

    max_length = min(2048, model.default_context)
    rope = RopeScalingSpec()
    if req.context_target is not None:
        if req.context_target > model.default_context:
            scale = req.context_target / model.default_context
            rope = RopeScalingSpec(
                kind=RopeKind.DYNAMIC_NTK,
                scale=scale,
                train_len=model.default_context,
            )
            max_length = req.context_target
            log.append(
                f"context target {req.context_target} exceeds the trained "
                f"{model.default_context}; enabling dynamic_ntk at scale {scale:g}"
            )
        else:
            max_length = req.context_target
            log.append(f"context target {req.context_target} within the trained length")

    cfg = TrainingConfig(
        model=model.name,
        method=method,
        quant_bits=required_quant_bits(method),
        zero_stage=zero_stage,
        dataset=dataset,
        data_mode="instruct",
        persona_name=req.persona_name,
        max_length=max_length,
        rope=rope,
        world=world,
    )

    launch = None
    if train_here and verdict.feasible:
        launch = emit.build_launch_command(cfg, inv)
        log.append("launch command generated for this machine")
    plan = Plan(
        config=cfg,
        verdict=verdict,
        rationale=tuple(log),
        launch=launch,
    )
    if not train_here:
        plan = replace(plan, readme=emit.render_readme(plan))
    return plan
