"""Orchestration of the four pipeline stages: source adapter training,
target pseudo-labeling + adaptation, ensemble distillation, evaluation.

Training backpropagates through: adapter -> row normalization -> cosine
similarities -> per-frame softmax -> frame mean -> loss, using the
prob-space loss gradients from the losses module.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .adapter import (
    Adapter,
    adapter_backward_batch,
    adapter_forward_batch,
    init_adapter,
)
from .dataio import EmbeddingDataset, align_by_id, resolve_labels
from .errors import (
    DimMismatch,
    EmptyAfterFiltering,
    InvalidConfig,
    UnlabeledSourceVideo,
)
from .kernels import one_hot, softmax_rows
from .losses import blended_distill_loss, similarity_kl_loss
from .optim import AdamWState, adamw_step
from .pseudolabel import (
    EnsembleBundle,
    PseudoLabelSet,
    ensemble_average,
    filter_by_class_percentile,
    majority_vote,
)
from .textspace import (
    ClassPrototypes,
    TextBank,
    build_prototypes,
    zeroshot_classify,
)

# per-stage stream ids mixed into the run seed
_STAGE_SOURCE = 11
_STAGE_TARGET = 12
_STAGE_DISTILL = 13

_SAFE_NORM = 1e-8  # norm floor inside training only; inference normalizes strictly


@dataclass
class TrainConfig:
    tau_sim: float = 0.01          # fallback; the text-bank value wins
    tau_distill: float = 2.0
    alpha: float = 0.3
    lr: float = 0.01
    weight_decay: float = 0.2
    epochs: int = 30
    batch_size: int = 32
    percentile: float = 0.8
    residual_ratio: float = 0.0
    seed: int = 0
    tau_sq_compensation: bool = True

    def validate(self) -> None:
        if self.tau_sim <= 0 or self.tau_distill <= 0:
            raise InvalidConfig("temperatures must be > 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidConfig("alpha must be in [0,1]")
        if not 0.0 < self.percentile < 1.0:
            raise InvalidConfig("percentile must be in (0,1)")
        if not 0.0 <= self.residual_ratio <= 1.0:
            raise InvalidConfig("residual_ratio must be in [0,1]")
        if self.lr <= 0 or self.weight_decay < 0:
            raise InvalidConfig("lr must be > 0 and weight_decay >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidConfig("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TeacherBundle:
    """The three frozen teacher heads of the ensemble."""

    prototypes: ClassPrototypes
    source_adapter: Adapter
    target_adapter: Adapter


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, purpose]))


def effective_tau_sim(bank: TextBank, cfg: TrainConfig) -> float:
    return bank.logit_temperature if bank.logit_temperature > 0 else cfg.tau_sim


def _video_step_forward(
    adapter: Adapter, frames: np.ndarray, protos: ClassPrototypes
) -> Tuple[np.ndarray, dict]:
    """Adapted video distribution plus everything the backward pass needs."""
    y, cache = adapter_forward_batch(adapter, frames)
    norms = np.maximum(np.linalg.norm(y, axis=1), _SAFE_NORM)
    unit = y / norms[:, None]
    sims = unit @ protos.prototypes.T
    probs = softmax_rows(sims, protos.logit_temperature)
    pbar = probs.mean(axis=0)
    aux = {"cache": cache, "norms": norms, "unit": unit, "probs": probs,
           "tau": protos.logit_temperature, "protos": protos.prototypes}
    return pbar, aux


def _video_step_backward(adapter: Adapter, aux: dict, grad_pbar: np.ndarray) -> dict:
    """Parameter gradients of a per-video loss given dL/d(mean distribution)."""
    probs = aux["probs"]
    k = probs.shape[0]
    g_probs = np.broadcast_to(grad_pbar / k, probs.shape)
    # softmax VJP rows, including the 1/tau from softmax(sims/tau)
    inner = np.sum(g_probs * probs, axis=1, keepdims=True)
    g_sims = probs * (g_probs - inner) / aux["tau"]
    g_unit = g_sims @ aux["protos"]
    unit = aux["unit"]
    g_y = (g_unit - np.sum(g_unit * unit, axis=1, keepdims=True) * unit)
    g_y /= aux["norms"][:, None]
    grads, _ = adapter_backward_batch(adapter, aux["cache"], g_y)
    return grads.as_dict()


def _accumulate(total: Optional[dict], grads: dict, scale: float) -> dict:
    if total is None:
        return {k: scale * v for k, v in grads.items()}
    for k, v in grads.items():
        total[k] += scale * v
    return total


def _train_adapter_on_videos(
    videos: Sequence[np.ndarray],
    loss_fn,
    bank: TextBank,
    cfg: TrainConfig,
    stage: int,
    sample_templates: bool = True,
) -> Tuple[Adapter, List[float]]:
    """Shared mini-batch loop. loss_fn(index, pbar) -> LossValueAndGrad."""
    d = videos[0].shape[1]
    adapter = init_adapter(d, [cfg.seed, stage], cfg.residual_ratio)
    state = AdamWState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = _stream(cfg.seed, stage)
    tau = effective_tau_sim(bank, cfg)
    full_protos = build_prototypes(bank, None, tau)
    n = len(videos)
    trace: List[float] = []
    params = adapter.param_dict()
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            if sample_templates:
                t_idx = int(rng.integers(bank.num_templates))
                protos = build_prototypes(bank, [t_idx], tau)
            else:
                protos = full_protos
            total = None
            scale = 1.0 / len(batch)
            for i in batch:
                pbar, aux = _video_step_forward(adapter, videos[i], protos)
                lvg = loss_fn(int(i), pbar)
                epoch_loss += lvg.value
                grads = _video_step_backward(adapter, aux, lvg.grad_probs)
                total = _accumulate(total, grads, scale)
            adamw_step(state, params, total)
        trace.append(epoch_loss / n)
    return adapter, trace


def train_source_adapter(
    source: EmbeddingDataset, bank: TextBank, cfg: TrainConfig
) -> Tuple[Adapter, List[float]]:
    """Supervised adapter training on labeled source videos."""
    cfg.validate()
    if source.embedding_dim != bank.embedding_dim:
        raise DimMismatch(
            f"dataset d={source.embedding_dim} vs bank d={bank.embedding_dim}"
        )
    for vid in source.videos:
        if vid.label < 0:
            raise UnlabeledSourceVideo(f"source video {vid.video_id!r} is unlabeled")
    c = bank.num_classes
    frames = [v.frames for v in source.videos]
    labels = [v.label for v in source.videos]

    def loss_fn(i, pbar):
        return similarity_kl_loss(pbar, one_hot(labels[i], c))

    return _train_adapter_on_videos(frames, loss_fn, bank, cfg, _STAGE_SOURCE)


def pseudo_label_target(
    target: EmbeddingDataset, bank: TextBank, cfg: TrainConfig
) -> PseudoLabelSet:
    """Zero-shot pseudo-labels from raw prototypes, percentile-filtered.

    Deliberately ignores any adapter: pseudo-labels always come from the
    unadapted embedding space.
    """
    protos = build_prototypes(bank, None, effective_tau_sim(bank, cfg))
    preds = zeroshot_classify(target, protos)
    return filter_by_class_percentile(preds, cfg.percentile)


def adapt_target(
    target: EmbeddingDataset, bank: TextBank, cfg: TrainConfig
) -> Tuple[Adapter, PseudoLabelSet, List[float]]:
    """Pseudo-label the target set and train a target adapter on the kept subset."""
    cfg.validate()
    if target.embedding_dim != bank.embedding_dim:
        raise DimMismatch(
            f"dataset d={target.embedding_dim} vs bank d={bank.embedding_dim}"
        )
    pls = pseudo_label_target(target, bank, cfg)
    kept = pls.kept_entries()
    if not kept:
        raise EmptyAfterFiltering("no pseudo-labels survived percentile filtering")
    by_id = {v.video_id: v for v in target.videos}
    frames = [by_id[e.video_id].frames for e in kept]
    labels = [e.pseudo_label for e in kept]
    c = bank.num_classes

    def loss_fn(i, pbar):
        return similarity_kl_loss(pbar, one_hot(labels[i], c))

    adapter, trace = _train_adapter_on_videos(frames, loss_fn, bank, cfg,
                                              _STAGE_TARGET)
    return adapter, pls, trace


def teacher_predictions(
    bundle: TeacherBundle, target_teacher: EmbeddingDataset
) -> Tuple[List[np.ndarray], List[int]]:
    """Ensemble-average distributions and majority-vote hard labels,
    computed once (the teachers are frozen)."""
    zs = zeroshot_classify(target_teacher, bundle.prototypes)
    src = zeroshot_classify(target_teacher, bundle.prototypes,
                            adapter=bundle.source_adapter)
    tgt = zeroshot_classify(target_teacher, bundle.prototypes,
                            adapter=bundle.target_adapter)
    ens = ensemble_average(EnsembleBundle(zeroshot=zs, source=src, target=tgt))
    hard = [
        majority_vote(z.predicted_class, s.predicted_class, t.predicted_class, e)
        for z, s, t, e in zip(zs, src, tgt, ens)
    ]
    return ens, hard


def distill(
    bundle: TeacherBundle,
    target_teacher: EmbeddingDataset,
    target_student: EmbeddingDataset,
    student_bank: TextBank,
    cfg: TrainConfig,
) -> Tuple[Adapter, List[float]]:
    """Train the student adapter against the frozen teacher ensemble
    over the whole target set (no filtering)."""
    cfg.validate()
    if target_student.embedding_dim != student_bank.embedding_dim:
        raise DimMismatch(
            f"student dataset d={target_student.embedding_dim} "
            f"vs bank d={student_bank.embedding_dim}"
        )
    target_teacher, target_student = align_by_id(target_teacher, target_student)
    ens, hard = teacher_predictions(bundle, target_teacher)
    frames = [v.frames for v in target_student.videos]

    def loss_fn(i, pbar):
        return blended_distill_loss(pbar, ens[i], hard[i], cfg.alpha,
                                    cfg.tau_distill, cfg.tau_sq_compensation)

    return _train_adapter_on_videos(frames, loss_fn, student_bank, cfg,
                                    _STAGE_DISTILL, sample_templates=False)


@dataclass
class EvalMetrics:
    accuracy: float
    per_class_accuracy: Dict[int, float]
    per_class_counts: Dict[int, int]
    confusion: np.ndarray  # (C, C) true x predicted
    n_videos: int
    predictions: List = field(default_factory=list)


def evaluate(
    dataset: EmbeddingDataset,
    protos: ClassPrototypes,
    adapter: Optional[Adapter] = None,
    sidecar: Optional[Dict[str, int]] = None,
) -> EvalMetrics:
    """Top-1 accuracy, per-class accuracy, and confusion matrix."""
    labels = resolve_labels(dataset, sidecar)
    preds = zeroshot_classify(dataset, protos, adapter=adapter)
    c = protos.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    for label, pred in zip(labels, preds):
        confusion[label, pred.predicted_class] += 1
    counts = {k: int(confusion[k].sum()) for k in range(c)}
    per_class = {
        k: float(confusion[k, k] / counts[k]) if counts[k] else 0.0
        for k in range(c)
    }
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    return EvalMetrics(
        accuracy=accuracy,
        per_class_accuracy=per_class,
        per_class_counts=counts,
        confusion=confusion,
        n_videos=total,
        predictions=preds,
    )


def save_metrics_csv(metrics: EvalMetrics, class_names: Sequence[str], path) -> None:
    """metrics.csv: one top1 row plus one row per class."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "class", "value", "count"])
        writer.writerow(["top1", "", repr(metrics.accuracy), metrics.n_videos])
        for c, name in enumerate(class_names):
            writer.writerow([
                "per_class", name, repr(metrics.per_class_accuracy[c]),
                metrics.per_class_counts[c],
            ])


def save_confusion_csv(metrics: EvalMetrics, class_names: Sequence[str], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + list(class_names))
        for c, name in enumerate(class_names):
            writer.writerow([name] + [int(x) for x in metrics.confusion[c]])


def save_loss_trace_csv(trace: Sequence[float], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, value in enumerate(trace):
            writer.writerow([i, repr(value)])


def save_predictions_csv(preds, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "predicted_class", "confidence"])
        for p in preds:
            writer.writerow([p.video_id, p.predicted_class, repr(p.confidence)])
