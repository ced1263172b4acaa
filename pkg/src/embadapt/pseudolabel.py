"""Pseudo-label filtering, ensemble averaging, and majority voting."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    MisalignedBundle,
    PercentileOutOfRange,
)
from .textspace import VideoPrediction


@dataclass(frozen=True)
class PseudoLabelEntry:
    video_id: str
    pseudo_label: int
    confidence: float
    kept: bool


@dataclass(frozen=True)
class PseudoLabelSet:
    entries: List[PseudoLabelEntry]  # all source predictions, input order
    class_thresholds: Dict[int, float]

    @property
    def source_count(self) -> int:
        return len(self.entries)

    @property
    def kept_count(self) -> int:
        return sum(1 for e in self.entries if e.kept)

    def kept_entries(self) -> List[PseudoLabelEntry]:
        return [e for e in self.entries if e.kept]


@dataclass(frozen=True)
class EnsembleBundle:
    """Aligned predictions of the three teacher heads over one video set."""

    zeroshot: List[VideoPrediction]
    source: List[VideoPrediction]
    target: List[VideoPrediction]

    def __post_init__(self):
        ids = [p.video_id for p in self.zeroshot]
        for name, preds in (("source", self.source), ("target", self.target)):
            if [p.video_id for p in preds] != ids:
                raise MisalignedBundle(f"{name} head video ids differ from zero-shot head")


def nearest_rank_threshold(confidences: Sequence[float], percentile: float) -> float:
    """Nearest-rank percentile: ascending sort, index ceil(p*n) - 1."""
    conf = sorted(confidences)
    n = len(conf)
    idx = int(np.ceil(percentile * n)) - 1
    return conf[max(idx, 0)]


def filter_by_class_percentile(
    preds: Sequence[VideoPrediction], percentile: float = 0.8
) -> PseudoLabelSet:
    """Keep, per predicted class, entries at or above that class's
    nearest-rank confidence percentile."""
    if not 0.0 < percentile < 1.0:
        raise PercentileOutOfRange(f"percentile must be in (0,1), got {percentile}")
    by_class: Dict[int, List[float]] = {}
    for p in preds:
        by_class.setdefault(p.predicted_class, []).append(p.confidence)
    thresholds = {
        c: nearest_rank_threshold(confs, percentile) for c, confs in by_class.items()
    }
    entries = [
        PseudoLabelEntry(
            video_id=p.video_id,
            pseudo_label=p.predicted_class,
            confidence=p.confidence,
            kept=p.confidence >= thresholds[p.predicted_class],
        )
        for p in preds
    ]
    return PseudoLabelSet(entries=entries, class_thresholds=thresholds)


def ensemble_average(bundle: EnsembleBundle) -> List[np.ndarray]:
    """(p_zs + p_src + p_tgt) / 3 per video, in bundle order."""
    return [
        (z.dist + s.dist + t.dist) / 3.0
        for z, s, t in zip(bundle.zeroshot, bundle.source, bundle.target)
    ]


def majority_vote(y_zs: int, y_src: int, y_tgt: int, fallback: np.ndarray) -> int:
    """Class with >= 2 of 3 votes, else the argmax of the fallback distribution."""
    n = len(fallback)
    for y in (y_zs, y_src, y_tgt):
        if not 0 <= y < n:
            raise IndexOutOfRange(f"vote {y} outside [0, {n})")
    if y_zs == y_src or y_zs == y_tgt:
        return y_zs
    if y_src == y_tgt:
        return y_src
    return int(np.argmax(fallback))


def save_pseudo_labels(pls: PseudoLabelSet, path) -> None:
    """Sidecar CSV: video_id,pseudo_label,confidence,kept."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "pseudo_label", "confidence", "kept"])
        for e in pls.entries:
            writer.writerow([e.video_id, e.pseudo_label, repr(e.confidence),
                             int(e.kept)])


def load_pseudo_labels(path) -> PseudoLabelSet:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            entries.append(
                PseudoLabelEntry(
                    video_id=row["video_id"],
                    pseudo_label=int(row["pseudo_label"]),
                    confidence=float(row["confidence"]),
                    kept=bool(int(row["kept"])),
                )
            )
    return PseudoLabelSet(entries=entries, class_thresholds={})
