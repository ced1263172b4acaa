"""Two-layer bottleneck MLP with a residual blend, plus hand-derived backprop.

Forward map: y = r*x + (1-r)*relu(W2 @ relu(W1 @ x + b1) + b2), with hidden
width h = max(1, round(d/4)). The backward pass is exact for this map with
the ReLU subgradient at 0 taken as 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    DimTooSmall,
    InvalidConfig,
    StaleCache,
    TruncatedFile,
)

ADAPTER_MAGIC = b"ADP1"
ADAPTER_VERSION = 1


@dataclass
class Adapter:
    w1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (d, h)
    b2: np.ndarray  # (d,)
    residual_ratio: float

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    def param_dict(self) -> dict:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def copy(self) -> "Adapter":
        return Adapter(self.w1.copy(), self.b1.copy(), self.w2.copy(),
                       self.b2.copy(), self.residual_ratio)


@dataclass
class ForwardCache:
    """Intermediates of one forward call, consumed by the backward pass."""

    x: np.ndarray   # (n, d) inputs
    pre1: np.ndarray  # (n, h) W1 x + b1
    act1: np.ndarray  # (n, h) relu(pre1)
    pre2: np.ndarray  # (n, d) W2 act1 + b2


@dataclass
class ParamGrads:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def as_dict(self) -> dict:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


def hidden_width(d: int) -> int:
    return max(1, int(round(d / 4)))


def init_adapter(d: int, seed: int, residual_ratio: float = 0.0) -> Adapter:
    """Seeded uniform(+-1/sqrt(fan_in)) weights, zero biases."""
    if d < 4:
        raise DimTooSmall(f"input dim must be >= 4, got {d}")
    if not 0.0 <= residual_ratio <= 1.0:
        raise InvalidConfig(f"residual_ratio must be in [0,1], got {residual_ratio}")
    h = hidden_width(d)
    rng = np.random.Generator(np.random.Philox(key=seed))
    lim1 = 1.0 / np.sqrt(d)
    lim2 = 1.0 / np.sqrt(h)
    return Adapter(
        w1=rng.uniform(-lim1, lim1, size=(h, d)),
        b1=np.zeros(h),
        w2=rng.uniform(-lim2, lim2, size=(d, h)),
        b2=np.zeros(d),
        residual_ratio=float(residual_ratio),
    )


def adapter_forward_batch(a: Adapter, x: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """Forward an (n, d) batch; returns outputs and the backward cache."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != a.input_dim:
        raise DimMismatch(f"input shape {x.shape} incompatible with d={a.input_dim}")
    pre1 = x @ a.w1.T + a.b1
    act1 = np.maximum(pre1, 0.0)
    pre2 = act1 @ a.w2.T + a.b2
    r = a.residual_ratio
    y = r * x + (1.0 - r) * np.maximum(pre2, 0.0)
    return y, ForwardCache(x=x, pre1=pre1, act1=act1, pre2=pre2)


def adapter_forward(a: Adapter, x: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """Forward a single d-vector."""
    y, cache = adapter_forward_batch(a, np.asarray(x, dtype=np.float64)[None, :])
    return y[0], cache


def adapter_backward_batch(
    a: Adapter, cache: ForwardCache, grad_out: np.ndarray
) -> Tuple[ParamGrads, np.ndarray]:
    """Exact gradients of the forward map; grad_out is (n, d)."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != cache.pre2.shape or cache.x.shape[1] != a.input_dim:
        raise StaleCache(
            f"grad_out shape {grad_out.shape} does not match cache {cache.pre2.shape}"
        )
    r = a.residual_ratio
    d_pre2 = (1.0 - r) * grad_out * (cache.pre2 > 0.0)
    g_w2 = d_pre2.T @ cache.act1
    g_b2 = d_pre2.sum(axis=0)
    d_act1 = d_pre2 @ a.w2
    d_pre1 = d_act1 * (cache.pre1 > 0.0)
    g_w1 = d_pre1.T @ cache.x
    g_b1 = d_pre1.sum(axis=0)
    grad_in = r * grad_out + d_pre1 @ a.w1
    return ParamGrads(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2), grad_in


def adapter_backward(
    a: Adapter, cache: ForwardCache, grad_out: np.ndarray
) -> Tuple[ParamGrads, np.ndarray]:
    """Backward for a single-vector forward call."""
    grads, grad_in = adapter_backward_batch(
        a, cache, np.asarray(grad_out, dtype=np.float64)[None, :]
    )
    return grads, grad_in[0]


def save_adapter(a: Adapter, path) -> None:
    """ADP1 checkpoint: magic, u32 version, u32 d, u32 h, f64 r, f64 params."""
    with open(path, "wb") as fh:
        fh.write(ADAPTER_MAGIC)
        fh.write(struct.pack("<IIId", ADAPTER_VERSION, a.input_dim,
                             a.hidden_dim, a.residual_ratio))
        for arr in (a.w1, a.b1, a.w2, a.b2):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_adapter(path) -> Adapter:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != ADAPTER_MAGIC:
        raise BadMagic(f"{path}: expected {ADAPTER_MAGIC!r}, got {data[:4]!r}")
    header = struct.Struct("<IIId")
    if len(data) < 4 + header.size:
        raise TruncatedFile(f"{path}: header truncated")
    version, d, h, r = header.unpack_from(data, 4)
    if version != ADAPTER_VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    offset = 4 + header.size
    shapes = [(h, d), (h,), (d, h), (d,)]
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(data):
            raise TruncatedFile(f"{path}: payload truncated")
        arrays.append(np.frombuffer(data[offset:end], dtype="<f8").reshape(shape).copy())
        offset = end
    if offset != len(data):
        raise TruncatedFile(f"{path}: {len(data) - offset} trailing bytes")
    return Adapter(w1=arrays[0], b1=arrays[1], w2=arrays[2], b2=arrays[3],
                   residual_ratio=float(r))
