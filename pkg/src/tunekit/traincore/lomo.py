"""Fused SGD updates in the style of LOMO.

The point of LOMO is memory, not math: each layer's gradient is applied
and released during the backward pass, so at most one layer's gradient
buffers are alive at a time. GradMeter instruments exactly that claim;
reference_sgd_run is the accumulate-everything baseline the fused path
must match numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ToyModel


@dataclass
class GradMeter:
    """Counts simultaneously-live gradient buffers, by layer."""

    live: set = field(default_factory=set)
    peak: int = 0

    def alloc(self, key) -> None:
        self.live.add(key)
        self.peak = max(self.peak, len(self.live))

    def free(self, key) -> None:
        self.live.discard(key)


def lomo_sgd_run(
    model: ToyModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    lr: float,
    meter: GradMeter | None = None,
) -> float:
    """One fused step: update each layer the moment its gradient exists.

    Updates the model in place and returns the (pre-update) loss.
    """
    loss = 0.0
    for i, layer_loss, grads in model.backward_layers(inputs, targets, meter=meter):
        loss = layer_loss
        layer = model.layers[i]
        if f"layer{i}.W" in grads:
            layer.W = layer.W - lr * grads[f"layer{i}.W"]
            layer.b = layer.b - lr * grads[f"layer{i}.b"]
        pair = model.adapted_layers.get(i)
        if pair is not None and f"layer{i}.A" in grads:
            pair.A = pair.A - lr * grads[f"layer{i}.A"]
            pair.B = pair.B - lr * grads[f"layer{i}.B"]
        del grads
    return loss


def reference_sgd_run(
    model: ToyModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    lr: float,
    meter: GradMeter | None = None,
) -> float:
    """Accumulate all gradients, then step. Holds every buffer at once."""
    held: list[dict[str, np.ndarray]] = []
    loss = 0.0
    for i, layer_loss, grads in model.backward_layers(inputs, targets):
        loss = layer_loss
        if meter is not None:
            meter.alloc(i)
        held.append(grads)
    merged: dict[str, np.ndarray] = {}
    for grads in held:
        merged.update(grads)
    params = model.trainable_params()
    model.set_params({k: params[k] - lr * merged[k] for k in merged})
    if meter is not None:
        for i in range(len(held)):
            meter.free(i)
    return loss
