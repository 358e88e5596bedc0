"""Optimizers over named parameter dicts.

All three are functional: they return new parameter and state values and
never touch their inputs. Params and grads are dicts name -> float64
array with matching keys and shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch

Params = dict[str, np.ndarray]


def _check_aligned(params: Params, grads: Params) -> None:
    if params.keys() != grads.keys():
        missing = params.keys() ^ grads.keys()
        raise ShapeMismatch(f"params and grads disagree on keys: {sorted(missing)}")
    for name, p in params.items():
        if p.shape != grads[name].shape:
            raise ShapeMismatch(
                f"{name}: param shape {p.shape} vs grad shape {grads[name].shape}"
            )


@dataclass
class LionState:
    """One momentum buffer per trainable tensor; that is the whole point."""

    momentum: Params = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.0

    @classmethod
    def init(cls, params: Params, **kw) -> "LionState":
        return cls(momentum={k: np.zeros_like(v) for k, v in params.items()}, **kw)

    def buffers_per_tensor(self) -> int:
        return 1


def lion_step(params: Params, grads: Params, state: LionState, lr: float) -> tuple[Params, LionState]:
    """c = b1*m + (1-b1)*g; p -= lr*(sign(c) + wd*p); m = b2*m + (1-b2)*g."""
    _check_aligned(params, grads)
    _check_aligned(params, state.momentum)
    new_params: Params = {}
    new_momentum: Params = {}
    for name, p in params.items():
        g = grads[name]
        m = state.momentum[name]
        c = state.beta1 * m + (1.0 - state.beta1) * g
        new_params[name] = p - lr * (np.sign(c) + state.weight_decay * p)
        new_momentum[name] = state.beta2 * m + (1.0 - state.beta2) * g
    new_state = LionState(
        momentum=new_momentum,
        beta1=state.beta1,
        beta2=state.beta2,
        weight_decay=state.weight_decay,
    )
    return new_params, new_state


@dataclass
class AdamState:
    """Reference implementation; holds two buffers per tensor."""

    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: Params, **kw) -> "AdamState":
        return cls(
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
            **kw,
        )

    def buffers_per_tensor(self) -> int:
        return 2


def adam_step(params: Params, grads: Params, state: AdamState, lr: float) -> tuple[Params, AdamState]:
    _check_aligned(params, grads)
    t = state.step + 1
    new_params: Params = {}
    new_m: Params = {}
    new_v: Params = {}
    for name, p in params.items():
        g = grads[name]
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v
    new_state = AdamState(
        m=new_m, v=new_v, step=t,
        beta1=state.beta1, beta2=state.beta2, eps=state.eps,
    )
    return new_params, new_state


def sgd_step(params: Params, grads: Params, lr: float) -> Params:
    """Plain SGD, no momentum; the LOMO path fuses exactly this update."""
    _check_aligned(params, grads)
    return {name: p - lr * grads[name] for name, p in params.items()}
