"""Loss math. All inputs are float64 numpy arrays."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log softmax, stabilized by the row max."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def _check(logits: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    if logits.ndim != 2:
        raise ShapeMismatch(f"logits must be positions x vocab, got shape {logits.shape}")
    if targets.ndim != 1 or targets.shape[0] != logits.shape[0]:
        raise ShapeMismatch(
            f"targets length {targets.shape} does not match {logits.shape[0]} positions"
        )
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise ShapeMismatch("target id outside the vocab")
    return logits, targets


def cross_entropy(logits: np.ndarray, targets) -> float:
    """Mean negative log likelihood of the target at each position."""
    logits, targets = _check(logits, targets)
    if logits.shape[0] == 0:
        raise ShapeMismatch("cross_entropy over zero positions")
    lsm = log_softmax(logits)
    picked = lsm[np.arange(len(targets)), targets]
    return float(-picked.mean())


def cross_entropy_grad(logits: np.ndarray, targets) -> np.ndarray:
    """d(mean CE)/d(logits): (softmax - onehot) / positions."""
    logits, targets = _check(logits, targets)
    probs = softmax(logits)
    probs[np.arange(len(targets)), targets] -= 1.0
    return probs / len(targets)
