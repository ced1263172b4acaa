"""Text-side class representations and the zero-shot classifier.

A TextBank holds per-class, per-template unit text embeddings. Prototypes
are the per-class template means, renormalized; classification is a
temperature softmax over cosine similarities, averaged over the frames of
a video.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimMismatch, EmptyTemplateSubset, EmptyVideo, IndexOutOfRange
from .kernels import l2_normalize_rows, softmax_rows

DEFAULT_LOGIT_TEMPERATURE = 0.01


@dataclass(frozen=True)
class TextBank:
    """Per-class, per-template unit text embeddings, shape (C, T, d)."""

    class_names: tuple
    templates: tuple
    embeddings: np.ndarray
    logit_temperature: float = DEFAULT_LOGIT_TEMPERATURE

    @property
    def embedding_dim(self) -> int:
        return self.embeddings.shape[2]

    @property
    def num_classes(self) -> int:
        return self.embeddings.shape[0]

    @property
    def num_templates(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class ClassPrototypes:
    """Unit class prototypes (C, d) plus the similarity temperature."""

    prototypes: np.ndarray
    logit_temperature: float

    @property
    def embedding_dim(self) -> int:
        return self.prototypes.shape[1]

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]


@dataclass(frozen=True)
class VideoPrediction:
    video_id: str
    dist: np.ndarray
    predicted_class: int
    confidence: float


def build_prototypes(
    bank: TextBank,
    template_subset: Optional[Sequence[int]] = None,
    tau_sim: Optional[float] = None,
) -> ClassPrototypes:
    """Average the selected template embeddings per class and renormalize."""
    if template_subset is None:
        idx = np.arange(bank.num_templates)
    else:
        idx = np.asarray(list(template_subset), dtype=np.int64)
        if idx.size == 0:
            raise EmptyTemplateSubset("template subset is empty")
        if np.any(idx < 0) or np.any(idx >= bank.num_templates):
            raise IndexOutOfRange(
                f"template indices must be in [0, {bank.num_templates})"
            )
    tau = bank.logit_temperature if tau_sim is None else tau_sim
    means = bank.embeddings[:, idx, :].mean(axis=1)
    return ClassPrototypes(prototypes=l2_normalize_rows(means), logit_temperature=tau)


def frame_probs(frame: np.ndarray, protos: ClassPrototypes) -> np.ndarray:
    """Class distribution of one frame: softmax of cosine similarities."""
    return video_frame_probs(np.asarray(frame, dtype=np.float64)[None, :], protos)[0]


def video_frame_probs(frames: np.ndarray, protos: ClassPrototypes) -> np.ndarray:
    """Per-frame class distributions for a (K, d) frame matrix."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != protos.embedding_dim:
        raise DimMismatch(
            f"frames shape {frames.shape} incompatible with d={protos.embedding_dim}"
        )
    unit = l2_normalize_rows(frames)
    sims = unit @ protos.prototypes.T
    return softmax_rows(sims, protos.logit_temperature)


def video_probs(frames: np.ndarray, protos: ClassPrototypes) -> np.ndarray:
    """Video-level distribution: mean of the per-frame distributions."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise EmptyVideo("video must contain at least one frame")
    return video_frame_probs(frames, protos).mean(axis=0)


def predict_video(video_id: str, frames: np.ndarray, protos: ClassPrototypes) -> VideoPrediction:
    dist = video_probs(frames, protos)
    pred = int(np.argmax(dist))  # ties resolve to the lowest index
    return VideoPrediction(video_id=video_id, dist=dist, predicted_class=pred,
                           confidence=float(dist[pred]))


def zeroshot_classify(dataset, protos: ClassPrototypes, adapter=None) -> list:
    """One VideoPrediction per video, in dataset order.

    If an adapter is given, frames pass through it before classification.
    """
    from .adapter import adapter_forward_batch

    preds = []
    for vid in dataset.videos:
        frames = vid.frames
        if adapter is not None:
            frames, _ = adapter_forward_batch(adapter, frames)
        preds.append(predict_video(vid.video_id, frames, protos))
    return preds
