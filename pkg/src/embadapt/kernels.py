"""Deterministic double-precision numeric kernels.

Everything here is a pure function on immutable inputs; all math is
float64 regardless of the caller's dtype. LOG_EPS is the clamp applied
inside every logarithm so one-hot targets stay finite.
"""

from __future__ import annotations

from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    LabelOutOfRange,
    LengthMismatch,
    NearZeroNorm,
    NonFiniteInput,
    NonPositiveTemperature,
)

ArrayLike = Union[Sequence[float], np.ndarray]

LOG_EPS = 1e-12
NORM_EPS = 1e-12


def as_vector(v: ArrayLike, name: str = "vector") -> np.ndarray:
    """Convert to a float64 1-D array, rejecting NaN/Inf."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise NonFiniteInput(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


def l2_normalize(v: ArrayLike) -> np.ndarray:
    """Scale v to unit Euclidean norm."""
    arr = as_vector(v)
    norm = float(np.linalg.norm(arr))
    if norm <= NORM_EPS:
        raise NearZeroNorm(f"norm {norm:.3e} <= {NORM_EPS:.0e}")
    return arr / norm


def l2_normalize_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise unit normalization for a 2-D array."""
    arr = np.asarray(mat, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("matrix contains NaN or Inf")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms <= NORM_EPS):
        raise NearZeroNorm("at least one row has near-zero norm")
    return arr / norms[:, None]


def softmax(logits: ArrayLike, tau: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction for overflow safety."""
    if tau <= 0:
        raise NonPositiveTemperature(f"tau must be > 0, got {tau}")
    z = as_vector(logits, "logits") / tau
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_rows(logits: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """Row-wise temperature softmax for a 2-D array of logits."""
    if tau <= 0:
        raise NonPositiveTemperature(f"tau must be > 0, got {tau}")
    z = np.asarray(logits, dtype=np.float64) / tau
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def kl_div(p: ArrayLike, q: ArrayLike) -> float:
    """KL(p || q) with both arguments clamped to [LOG_EPS, 1]."""
    pa = as_vector(p, "p")
    qa = as_vector(q, "q")
    if pa.shape != qa.shape:
        raise LengthMismatch(f"p has {pa.size} entries, q has {qa.size}")
    pc = np.clip(pa, LOG_EPS, 1.0)
    qc = np.clip(qa, LOG_EPS, 1.0)
    return float(np.sum(pc * (np.log(pc) - np.log(qc))))


def cross_entropy(p: ArrayLike, label: int) -> float:
    """-ln p[label], clamped so a zero probability stays finite."""
    pa = as_vector(p, "p")
    if not 0 <= label < pa.size:
        raise LabelOutOfRange(f"label {label} outside [0, {pa.size})")
    return float(-np.log(max(float(pa[label]), LOG_EPS)))


def finite_diff_grad(
    f: Callable[[np.ndarray], float],
    theta: ArrayLike,
    h: float = 1e-6,
) -> np.ndarray:
    """Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h."""
    x = as_vector(theta, "theta")
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def one_hot(label: int, n: int) -> np.ndarray:
    if not 0 <= label < n:
        raise LabelOutOfRange(f"label {label} outside [0, {n})")
    v = np.zeros(n, dtype=np.float64)
    v[label] = 1.0
    return v
