"""Round-to-nearest weight quantization with per-group absmax scales.

Groups of 64 values share one scale (the group's absolute maximum);
codes are symmetric signed integers and a value reconstructs as
(code / qmax) * scale. That formula makes saturated codes reproduce the
group maximum bit-exactly, so constant tensors survive the round trip.
4-bit codes pack two per byte. Reconstruction error is bounded by half
the quantization step (scale / qmax), zero for all-zero groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BadSpec

GROUP_SIZE = 64


@dataclass(frozen=True)
class QuantizedTensor:
    codes: np.ndarray       # uint8; 4-bit mode holds two codes per byte
    scales: np.ndarray      # float64 group absmax; value = code/qmax * scale
    group_size: int
    bits: int               # 4 or 8
    shape: tuple[int, ...]  # original tensor shape
    count: int              # original element count (before padding)

    @property
    def qmax(self) -> int:
        return (1 << (self.bits - 1)) - 1

    @property
    def steps(self) -> np.ndarray:
        """Per-group quantization step; error is at most steps/2."""
        return self.scales / self.qmax


def _as_groups(flat: np.ndarray, group: int) -> np.ndarray:
    pad = (-len(flat)) % group
    if pad:
        flat = np.concatenate([flat, np.zeros(pad, dtype=np.float64)])
    return flat.reshape(-1, group)


def quantize_rtn(tensor: np.ndarray, bits: int = 4, group: int = GROUP_SIZE) -> QuantizedTensor:
    if bits not in (4, 8):
        raise BadSpec(f"bits must be 4 or 8, got {bits}")
    if group < 1:
        raise BadSpec(f"group size must be positive, got {group}")
    arr = np.asarray(tensor, dtype=np.float64)
    flat = arr.reshape(-1)
    groups = _as_groups(flat, group)
    qmax = (1 << (bits - 1)) - 1
    scales = np.abs(groups).max(axis=1)
    # All-zero groups quantize to zero codes exactly; keep scale 0 and
    # avoid the division.
    safe = np.where(scales > 0, scales, 1.0)
    codes = np.clip(np.rint(groups / safe[:, None] * qmax), -qmax, qmax).astype(np.int8)
    codes[scales == 0] = 0
    if bits == 8:
        packed = codes.astype(np.uint8).reshape(-1)
    else:
        nibbles = (codes.reshape(-1) & 0x0F).astype(np.uint8)
        if len(nibbles) % 2:
            nibbles = np.concatenate([nibbles, np.zeros(1, dtype=np.uint8)])
        packed = nibbles[0::2] | (nibbles[1::2] << 4)
    return QuantizedTensor(
        codes=packed, scales=scales, group_size=group, bits=bits,
        shape=arr.shape, count=flat.size,
    )


def dequantize(qt: QuantizedTensor) -> np.ndarray:
    if qt.bits == 8:
        codes = qt.codes.astype(np.int8).astype(np.float64)
    else:
        low = (qt.codes & 0x0F).astype(np.uint8)
        high = (qt.codes >> 4).astype(np.uint8)
        nibbles = np.empty(len(qt.codes) * 2, dtype=np.uint8)
        nibbles[0::2] = low
        nibbles[1::2] = high
        # sign-extend 4-bit two's complement
        signed = nibbles.astype(np.int8)
        signed[signed >= 8] -= 16
        codes = signed.astype(np.float64)
    padded_len = len(qt.scales) * qt.group_size
    codes = codes[:padded_len].reshape(-1, qt.group_size)
    values = codes / qt.qmax * qt.scales[:, None]
    return values.reshape(-1)[: qt.count].reshape(qt.shape)
