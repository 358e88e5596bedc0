"""Rotary position embedding and its context-extension variants.

Seven kinds are supported: plain rotary ("none"), linear position
interpolation, NTK-aware base adjustment (ntk_v1), the per-frequency
ramp blend (ntk_v2), dynamic forms of linear and NTK scaling that derive
the scale from the current sequence length, and exponential-decay
weighting (xpos). Everything runs at 64-bit precision; the dynamic
variants recompute the table per sequence length instead of caching.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import BadSpec, DimensionMismatch


class RopeKind(str, enum.Enum):
    NONE = "none"
    LINEAR = "linear"
    DYNAMIC_LINEAR = "dynamic_linear"
    NTK_V1 = "ntk_v1"
    DYNAMIC_NTK = "dynamic_ntk"
    NTK_V2 = "ntk_v2"
    XPOS = "xpos"


@dataclass(frozen=True)
class RopeScalingSpec:
    kind: RopeKind = RopeKind.NONE
    scale: float = 1.0
    base: float = 10000.0
    dim: int = 128
    train_len: int = 2048
    ntk2_alpha: float = 1.0
    ntk2_beta: float = 32.0
    xpos_gamma: float = 0.4

    def __post_init__(self):
        if self.dim % 2 != 0 or self.dim < 2:
            raise BadSpec(f"dim must be a positive even number, got {self.dim}")
        if self.scale < 1:
            raise BadSpec(f"scale must be >= 1, got {self.scale}")
        if not self.ntk2_alpha < self.ntk2_beta:
            raise BadSpec("ntk2_alpha must be < ntk2_beta")
        if self.train_len < 1:
            raise BadSpec("train_len must be >= 1")


@dataclass(frozen=True)
class FrequencyTable:
    """Per-pair rotation frequencies plus the position mapping.

    The effective position of token m is m / position_scale; linear
    interpolation is the only family that maps positions, every other
    kind reshapes the frequencies themselves.
    """

    thetas: np.ndarray          # (dim/2,), strictly decreasing
    position_scale: float = 1.0

    @property
    def dim(self) -> int:
        return 2 * len(self.thetas)

    def position(self, m: float) -> float:
        return m / self.position_scale

    def angles(self, m: float) -> np.ndarray:
        return self.position(m) * self.thetas


def _base_thetas(base: float, dim: int) -> np.ndarray:
    i = np.arange(dim // 2, dtype=np.float64)
    return base ** (-2.0 * i / dim)


def frequencies(spec: RopeScalingSpec, seq_len: int) -> FrequencyTable:
    """Build the frequency table for this spec at the given sequence length.

    Dynamic kinds substitute s_eff = max(1, seq_len/train_len) into their
    static counterpart, so any seq_len up to train_len reproduces the
    unscaled table exactly.
    """
    if spec.dim % 2 != 0:
        raise BadSpec(f"dim must be even, got {spec.dim}")
    if seq_len < 1:
        raise BadSpec(f"seq_len must be >= 1, got {seq_len}")

    kind = spec.kind
    scale = spec.scale
    if kind is RopeKind.DYNAMIC_LINEAR:
        kind, scale = RopeKind.LINEAR, max(1.0, seq_len / spec.train_len)
    elif kind is RopeKind.DYNAMIC_NTK:
        kind, scale = RopeKind.NTK_V1, max(1.0, seq_len / spec.train_len)

    if kind in (RopeKind.NONE, RopeKind.XPOS):
        return FrequencyTable(_base_thetas(spec.base, spec.dim))
    if kind is RopeKind.LINEAR:
        return FrequencyTable(_base_thetas(spec.base, spec.dim), position_scale=scale)
    if kind is RopeKind.NTK_V1:
        adjusted = spec.base * scale ** (spec.dim / (spec.dim - 2))
        return FrequencyTable(_base_thetas(adjusted, spec.dim))
    if kind is RopeKind.NTK_V2:
        thetas = _base_thetas(spec.base, spec.dim)
        wavelengths = 2.0 * np.pi / thetas
        ratios = spec.train_len / wavelengths
        ramp = np.clip(
            (ratios - spec.ntk2_alpha) / (spec.ntk2_beta - spec.ntk2_alpha), 0.0, 1.0
        )
        blended = (1.0 - ramp) * thetas / scale + ramp * thetas
        return FrequencyTable(blended)
    raise BadSpec(f"unhandled kind {spec.kind}")


def rotate(vec: np.ndarray, m: float, table: FrequencyTable) -> np.ndarray:
    """Rotate consecutive pairs of vec by the position-m angles."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (table.dim,):
        raise DimensionMismatch(f"vector length {vec.shape} != table dim {table.dim}")
    angles = table.angles(m)
    cos, sin = np.cos(angles), np.sin(angles)
    x, y = vec[0::2], vec[1::2]
    out = np.empty_like(vec)
    out[0::2] = x * cos - y * sin
    out[1::2] = x * sin + y * cos
    return out


def xpos_decay(spec: RopeScalingSpec) -> np.ndarray:
    """Per-pair decay bases zeta_i = ((2i/dim) + gamma) / (1 + gamma)."""
    i = np.arange(spec.dim // 2, dtype=np.float64)
    return (2.0 * i / spec.dim + spec.xpos_gamma) / (1.0 + spec.xpos_gamma)


def score(
    q: np.ndarray,
    k: np.ndarray,
    m: int,
    n: int,
    spec: RopeScalingSpec,
    seq_len: int | None = None,
) -> float:
    """Attention score between q at position m and k at position n.

    For the xpos kind each pair's contribution is additionally weighted
    by zeta_i**(m - n); all other kinds are the plain rotated dot product.
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != k.shape:
        raise DimensionMismatch(f"q shape {q.shape} != k shape {k.shape}")
    if seq_len is None:
        seq_len = max(m, n) + 1
    table = frequencies(spec, seq_len)
    rq = rotate(q, m, table)
    rk = rotate(k, n, table)
    if spec.kind is not RopeKind.XPOS:
        return float(np.dot(rq, rk))
    pair_dots = rq[0::2] * rk[0::2] + rq[1::2] * rk[1::2]
    weights = xpos_decay(spec) ** (m - n)
    return float(np.sum(weights * pair_dots))


def table_csv(spec: RopeScalingSpec, seq_len: int) -> str:
    """CSV dump of the frequency table, for plotting."""
    table = frequencies(spec, seq_len)
    lines = ["index,theta,wavelength,position_scale"]
    for i, theta in enumerate(table.thetas):
        theta = float(theta)
        lines.append(f"{i},{theta!r},{2.0 * np.pi / theta!r},{float(table.position_scale)!r}")
    return "\n".join(lines) + "\n"
