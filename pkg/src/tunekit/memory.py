"""GPU memory feasibility: the calibrated minimum-configuration table plus
an advisory analytic estimator.

The table is authoritative. Its minima embed offload behavior that
first-principles math cannot reproduce (a 7B full fine-tune in 8 GiB only
works because optimizer state leaves the GPU), so the estimator below is
advisory and never overrides a table verdict.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .hardware import GIB, GpuInventory
from .registry import ModelSpec, SizeBucket, size_bucket


class MethodKind(str, enum.Enum):
    """Training-method columns of the feasibility table."""

    FULL16 = "full16"
    LOMO16 = "lomo16"
    LORA16 = "lora16"
    LORA8 = "lora8"
    LORA4 = "lora4"

    @property
    def bits(self) -> int:
        """Base-weight bit width (quantized base for the low-bit LoRA modes)."""
        return {MethodKind.LORA8: 8, MethodKind.LORA4: 4}.get(self, 16)

    @property
    def trains_all_params(self) -> bool:
        return self in (MethodKind.FULL16, MethodKind.LOMO16)


@dataclass(frozen=True, order=True)
class GpuLayout:
    """A hardware requirement or description: count devices of equal memory."""

    count: int
    per_device_mem: int  # bytes

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.per_device_mem <= 0:
            raise ValueError("per_device_mem must be positive")

    @property
    def total_mem(self) -> int:
        return self.count * self.per_device_mem

    def shorthand(self) -> str:
        gib = self.per_device_mem / GIB
        mem = f"{gib:g} GB"
        return mem if self.count == 1 else f"{self.count}x{mem}"


@dataclass(frozen=True)
class MemoryVerdict:
    feasible: bool
    satisfied_layout: Optional[GpuLayout]
    required_layouts: tuple[GpuLayout, ...]

    def __post_init__(self):
        if self.feasible != (self.satisfied_layout is not None):
            raise ValueError("feasible must track satisfied_layout presence")


def _gb(gib: int, count: int = 1) -> GpuLayout:
    return GpuLayout(count=count, per_device_mem=gib * GIB)


# Minimum configurations at batch size 1, (bucket, method) -> alternative
# layouts ordered by ascending device count. 30 cells, embedded verbatim.
_MIN_TABLE: dict[tuple[SizeBucket, MethodKind], tuple[GpuLayout, ...]] = {
    (SizeBucket.B1, MethodKind.FULL16): (_gb(8),),
    (SizeBucket.B1, MethodKind.LOMO16): (_gb(4),),
    (SizeBucket.B1, MethodKind.LORA16): (_gb(4),),
    (SizeBucket.B1, MethodKind.LORA8): (_gb(6),),
    (SizeBucket.B1, MethodKind.LORA4): (_gb(6),),

    (SizeBucket.B7, MethodKind.FULL16): (_gb(8),),
    (SizeBucket.B7, MethodKind.LOMO16): (_gb(6),),
    (SizeBucket.B7, MethodKind.LORA16): (_gb(6),),
    (SizeBucket.B7, MethodKind.LORA8): (_gb(8),),
    (SizeBucket.B7, MethodKind.LORA4): (_gb(8),),

    (SizeBucket.B13, MethodKind.FULL16): (_gb(16),),
    (SizeBucket.B13, MethodKind.LOMO16): (_gb(10),),
    (SizeBucket.B13, MethodKind.LORA16): (_gb(10),),
    (SizeBucket.B13, MethodKind.LORA8): (_gb(12),),
    (SizeBucket.B13, MethodKind.LORA4): (_gb(10),),

    (SizeBucket.B33, MethodKind.FULL16): (_gb(48, 2),),
    (SizeBucket.B33, MethodKind.LOMO16): (_gb(24),),
    (SizeBucket.B33, MethodKind.LORA16): (_gb(24),),
    (SizeBucket.B33, MethodKind.LORA8): (_gb(32),),
    (SizeBucket.B33, MethodKind.LORA4): (_gb(32),),

    (SizeBucket.B70, MethodKind.FULL16): (_gb(80, 2), _gb(48, 4), _gb(24, 8)),
    (SizeBucket.B70, MethodKind.LOMO16): (_gb(48), _gb(24, 2)),
    (SizeBucket.B70, MethodKind.LORA16): (_gb(48), _gb(24, 2)),
    (SizeBucket.B70, MethodKind.LORA8): (_gb(80), _gb(32, 2)),
    (SizeBucket.B70, MethodKind.LORA4): (_gb(48), _gb(24, 2)),

    (SizeBucket.B130, MethodKind.FULL16): (_gb(80, 4), _gb(48, 8)),
    (SizeBucket.B130, MethodKind.LOMO16): (_gb(80, 2), _gb(48, 4), _gb(24, 8)),
    (SizeBucket.B130, MethodKind.LORA16): (_gb(80, 2), _gb(48, 4), _gb(24, 8)),
    (SizeBucket.B130, MethodKind.LORA8): (_gb(80, 2), _gb(48, 4), _gb(24, 8)),
    (SizeBucket.B130, MethodKind.LORA4): (_gb(80, 2), _gb(48, 4), _gb(24, 8)),
}


def min_layouts(bucket: SizeBucket, method: MethodKind) -> list[GpuLayout]:
    """The table cell's alternative layouts, ascending device count."""
    return list(_MIN_TABLE[(bucket, method)])


def _dominates(inv: GpuInventory, layout: GpuLayout) -> bool:
    # Total memory decides feasibility; free memory is reported separately.
    big_enough = [d for d in inv.devices if d.total_mem >= layout.per_device_mem]
    return len(big_enough) >= layout.count


def check_feasible(inv: GpuInventory, bucket: SizeBucket, method: MethodKind) -> MemoryVerdict:
    """Feasible iff the inventory dominates some alternative of the cell.

    Domination means: at least `count` devices whose total memory reaches
    the cell's per-device requirement. The first dominated alternative (in
    min_layouts order) is reported as satisfied.
    """
    required = tuple(min_layouts(bucket, method))
    for layout in required:
        if _dominates(inv, layout):
            return MemoryVerdict(True, layout, required)
    return MemoryVerdict(False, None, required)


def export_table() -> dict:
    """The full matrix as plain data (rows = buckets, cols = methods)."""
    rows = {}
    for bucket in SizeBucket:
        rows[bucket.label] = {
            method.value: [
                {"count": lay.count, "per_device_gib": lay.per_device_mem // GIB}
                for lay in min_layouts(bucket, method)
            ]
            for method in MethodKind
        }
    return rows


# ---------------------------------------------------------------------------
# Advisory analytic estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MemoryEstimate:
    """Per-device memory components in bytes, plus the rules that produced
    them. Advisory only; the table above is what feasibility checks use."""

    weights: int
    optimizer_states: int
    gradients: int
    adapter: int
    total_per_device: int
    assumptions: tuple[str, ...] = field(default=())


def nominal_dims(param_count: int) -> tuple[int, int]:
    """Nominal (hidden, layers) for a dense transformer of this size.

    Uses params ~= 12*L*h^2 with the conventional aspect ratio h = 128*L;
    exact shapes are out of scope for the registry, so these only feed the
    advisory estimator.
    """
    hidden = (128 * param_count / 12) ** (1 / 3)
    hidden = max(128, int(round(hidden / 128)) * 128)
    layers = max(1, round(hidden / 128))
    return hidden, layers


def lora_adapter_params(shapes: list[tuple[int, int]], rank: int) -> int:
    """Trainable adapter parameters for low-rank pairs over (out, in) shapes."""
    return sum(rank * (out + inp) for out, inp in shapes)


def estimate_components(
    model: ModelSpec,
    method: MethodKind,
    optimizer: str = "lion",
    mp_degree: int = 1,
    lora_rank: int = 8,
    adapted_shapes: Optional[list[tuple[int, int]]] = None,
) -> MemoryEstimate:
    """Break training memory into components, sharded over mp_degree devices.

    optimizer is "lion" (one momentum buffer, 2 bytes per trainable param)
    or "adam" (two buffers, so exactly twice lion's optimizer bytes).
    """
    if mp_degree < 1:
        raise ValueError("mp_degree must be >= 1")
    if optimizer not in ("lion", "adam"):
        raise ValueError(f"unknown optimizer {optimizer!r}")

    assumptions = [
        f"base weights at {method.bits}-bit precision",
        f"sharded across {mp_degree} device(s), ZeRO stage/offload uncalibrated",
    ]
    weights = math.ceil(model.param_count * method.bits / 8 / mp_degree)

    hidden, layers = nominal_dims(model.param_count)
    if method.trains_all_params:
        trainable = model.param_count
        adapter_params = 0
        assumptions.append("all parameters trainable")
    else:
        if adapted_shapes is None:
            adapted_shapes = [(hidden, hidden)] * (2 * layers)
            assumptions.append(
                f"adapters on q/v projections of a nominal {layers}-layer, "
                f"hidden-{hidden} transformer"
            )
        adapter_params = lora_adapter_params(adapted_shapes, lora_rank)
        trainable = adapter_params
        assumptions.append(f"rank-{lora_rank} adapters only ({adapter_params} params)")

    opt_factor = 1 if optimizer == "lion" else 2
    assumptions.append(f"{optimizer}: {opt_factor} state buffer(s) per trainable tensor")
    optimizer_states = math.ceil(trainable * 2 * opt_factor / mp_degree)

    if method is MethodKind.LOMO16:
        # Fused updates keep only one layer's gradient alive at a time.
        gradients = math.ceil(trainable * 2 / layers / mp_degree)
        assumptions.append(f"fused updates hold one layer's gradient (of {layers})")
    else:
        gradients = math.ceil(trainable * 2 / mp_degree)

    adapter = math.ceil(adapter_params * 2 / mp_degree)
    total = weights + optimizer_states + gradients + adapter
    return MemoryEstimate(
        weights=weights,
        optimizer_states=optimizer_states,
        gradients=gradients,
        adapter=adapter,
        total_per_device=total,
        assumptions=tuple(assumptions),
    )


def bucket_for_model(model: ModelSpec) -> SizeBucket:
    return size_bucket(model.param_count)
