"""Training objectives with analytic gradients.

Each loss reports two gradients: grad_logits, the gradient with respect to
the pre-softmax logits of the model distribution (exact when that
distribution is one softmax), and grad_probs, the gradient with respect to
the probabilities themselves. Training loops that average per-frame
softmaxes chain grad_probs through the frame-mean instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, LengthMismatch, NonPositiveTemperature
from .kernels import LOG_EPS, as_vector, kl_div, one_hot


@dataclass(frozen=True)
class LossValueAndGrad:
    value: float
    grad_logits: np.ndarray
    grad_probs: np.ndarray


def temper(p: np.ndarray, tau: float) -> np.ndarray:
    """Renormalized power transform p^(1/tau); equals softmax(logits/tau)."""
    if tau <= 0:
        raise NonPositiveTemperature(f"tau must be > 0, got {tau}")
    powered = np.power(np.clip(np.asarray(p, dtype=np.float64), LOG_EPS, None), 1.0 / tau)
    return powered / powered.sum()


def similarity_kl_loss(video_dist, q) -> LossValueAndGrad:
    """KL(q || p) against the model's video distribution p."""
    p = as_vector(video_dist, "video_dist")
    qa = as_vector(q, "q")
    if p.shape != qa.shape:
        raise LengthMismatch(f"p has {p.size} entries, q has {qa.size}")
    value = kl_div(qa, p)
    grad_probs = np.where(p >= LOG_EPS, -qa / np.maximum(p, LOG_EPS), 0.0)
    return LossValueAndGrad(value=value, grad_logits=p - qa, grad_probs=grad_probs)


def cross_entropy_loss(dist, label: int) -> LossValueAndGrad:
    """-ln p[label] with softmax-logit gradient p - onehot."""
    p = as_vector(dist, "dist")
    target = one_hot(label, p.size)
    value = float(-np.log(max(float(p[label]), LOG_EPS)))
    grad_probs = np.zeros_like(p)
    if p[label] >= LOG_EPS:
        grad_probs[label] = -1.0 / p[label]
    return LossValueAndGrad(value=value, grad_logits=p - target, grad_probs=grad_probs)


def tempered_distill_kl(
    student_dist, ensemble_dist, tau_distill: float, tau_sq_compensation: bool = True
) -> LossValueAndGrad:
    """KL between tempered ensemble (teacher) and tempered student.

    Gradients are with respect to the student; when tau_sq_compensation is
    on they are scaled by tau^2 so the gradient magnitude stays comparable
    across temperatures.
    """
    s = as_vector(student_dist, "student_dist")
    e = as_vector(ensemble_dist, "ensemble_dist")
    if s.shape != e.shape:
        raise LengthMismatch(f"student has {s.size} entries, ensemble has {e.size}")
    ts = temper(s, tau_distill)
    te = temper(e, tau_distill)
    value = kl_div(te, ts)
    scale = tau_distill if tau_sq_compensation else 1.0 / tau_distill
    grad_logits = scale * (ts - te)
    grad_probs = scale * (ts - te) / np.maximum(s, LOG_EPS)
    return LossValueAndGrad(value=value, grad_logits=grad_logits, grad_probs=grad_probs)


def blended_distill_loss(
    student_dist,
    ensemble_dist,
    hard_label: int,
    alpha: float,
    tau_distill: float,
    tau_sq_compensation: bool = True,
) -> LossValueAndGrad:
    """alpha * CE(hard label) + (1 - alpha) * tempered distillation KL."""
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must be in [0,1], got {alpha}")
    ce = cross_entropy_loss(student_dist, hard_label)
    kd = tempered_distill_kl(student_dist, ensemble_dist, tau_distill,
                             tau_sq_compensation)
    return LossValueAndGrad(
        value=alpha * ce.value + (1.0 - alpha) * kd.value,
        grad_logits=alpha * ce.grad_logits + (1.0 - alpha) * kd.grad_logits,
        grad_probs=alpha * ce.grad_probs + (1.0 - alpha) * kd.grad_probs,
    )
