"""Low-rank adapter math: adapter-path forward and weight merging."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


def _check_pair(W: np.ndarray, A: np.ndarray, B: np.ndarray, r: int) -> None:
    out_dim, in_dim = W.shape
    if A.shape != (r, in_dim):
        raise ShapeMismatch(f"A must be ({r}, {in_dim}), got {A.shape}")
    if B.shape != (out_dim, r):
        raise ShapeMismatch(f"B must be ({out_dim}, {r}), got {B.shape}")


def lora_forward(W: np.ndarray, A: np.ndarray, B: np.ndarray,
                 alpha: float, r: int, x: np.ndarray) -> np.ndarray:
    """W @ x + (alpha/r) * B @ (A @ x), without forming the merged matrix."""
    W = np.asarray(W, dtype=np.float64)
    _check_pair(W, A, B, r)
    if x.shape[0] != W.shape[1]:
        raise ShapeMismatch(f"x has dim {x.shape[0]}, layer expects {W.shape[1]}")
    return W @ x + (alpha / r) * (B @ (A @ x))


def lora_merge(W: np.ndarray, A: np.ndarray, B: np.ndarray,
               alpha: float, r: int) -> np.ndarray:
    """The deployable merged weight W + (alpha/r) * B @ A."""
    W = np.asarray(W, dtype=np.float64)
    _check_pair(W, A, B, r)
    return W + (alpha / r) * (B @ A)
