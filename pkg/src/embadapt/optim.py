"""AdamW with decoupled weight decay, operating on dicts of named arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import NonFiniteGradient, ShapeMismatch

BIAS_KEYS = ("b1", "b2")


@dataclass
class AdamWState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    decay_biases: bool = True
    step_count: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(
    state: AdamWState,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
) -> None:
    """One in-place AdamW update; decay is decoupled from the adaptive term."""
    if set(params) != set(grads):
        raise ShapeMismatch(f"param keys {sorted(params)} != grad keys {sorted(grads)}")
    for key, g in grads.items():
        if g.shape != params[key].shape:
            raise ShapeMismatch(
                f"{key}: grad shape {g.shape} != param shape {params[key].shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"{key}: gradient contains NaN or Inf")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for key, theta in params.items():
        g = np.asarray(grads[key], dtype=np.float64)
        if key not in state.m:
            state.m[key] = np.zeros_like(theta)
            state.v[key] = np.zeros_like(theta)
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        wd = state.weight_decay
        if not state.decay_biases and key in BIAS_KEYS:
            wd = 0.0
        theta -= state.lr * (m_hat / (np.sqrt(v_hat) + state.eps) + wd * theta)
