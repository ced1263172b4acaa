"""Synthetic domain-shift benchmark generator.

Builds a desk-scale two-domain, two-embedding-space benchmark with known
ground truth: class prototypes on the unit sphere, a text bank of
perturbed prototypes, source videos clustered around prototypes, target
videos pushed through a rotation/bias shift of strength lambda, and a
second ("student") space obtained via a fixed random linear map.

Each sampling purpose draws from its own counter-based stream, so e.g.
changing the video count never perturbs the prototypes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from .dataio import (
    BenchmarkManifest,
    EmbeddingDataset,
    VideoRecord,
    save_embeddings,
    save_label_sidecar,
    save_manifest,
    save_text_bank,
)
from .errors import InvalidConfig
from .kernels import l2_normalize_rows
from .prompts import DEFAULT_TEMPLATES
from .textspace import TextBank

# stream ids for the per-purpose Philox keys
_S_PROTO = 1
_S_TEXT = 2
_S_SOURCE = 3
_S_TARGET = 4
_S_SHIFT = 5
_S_CROSS = 6
_S_CROSS_TEXT = 7


@dataclass
class SynthConfig:
    classes: int = 8
    teacher_dim: int = 64
    student_dim: int = 48
    videos_per_class: int = 40
    frames_per_video: int = 8
    num_templates: int = 16
    sigma_class: float = 0.25
    shift_lambda: float = 0.5
    bias_magnitude: float = 0.05
    sigma_text: float = 0.02
    sigma_cross: float = 0.01
    logit_temperature: float = 0.05
    seed: int = 0
    class_names: List[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.classes < 2:
            raise InvalidConfig("need at least 2 classes")
        if self.teacher_dim < 4 or self.student_dim < 4:
            raise InvalidConfig("embedding dims must be >= 4")
        if self.videos_per_class < 1 or self.frames_per_video < 1:
            raise InvalidConfig("need >= 1 video per class and >= 1 frame per video")
        if self.num_templates < 1:
            raise InvalidConfig("need >= 1 template")
        if not 0.0 <= self.shift_lambda <= 1.0:
            raise InvalidConfig("shift_lambda must be in [0,1]")
        for name in ("sigma_class", "sigma_text", "sigma_cross", "bias_magnitude"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")
        if self.logit_temperature <= 0:
            raise InvalidConfig("logit_temperature must be > 0")


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, purpose]))


def _random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Orthogonal matrix from Gram-Schmidt on a seeded Gaussian matrix."""
    mat = rng.standard_normal((d, d))
    q = np.zeros_like(mat)
    for i in range(d):
        v = mat[i].copy()
        for j in range(i):
            v -= (v @ q[j]) * q[j]
        q[i] = v / np.linalg.norm(v)
    return q


def _class_names(cfg: SynthConfig) -> List[str]:
    if cfg.class_names:
        if len(cfg.class_names) != cfg.classes:
            raise InvalidConfig(
                f"{len(cfg.class_names)} class names for {cfg.classes} classes"
            )
        return list(cfg.class_names)
    return [f"class_{c:02d}" for c in range(cfg.classes)]


def _make_videos(
    rng: np.random.Generator,
    prototypes: np.ndarray,
    cfg: SynthConfig,
    prefix: str,
    labeled: bool,
) -> List[VideoRecord]:
    videos = []
    for c in range(cfg.classes):
        for i in range(cfg.videos_per_class):
            noise = rng.standard_normal((cfg.frames_per_video, cfg.teacher_dim))
            frames = l2_normalize_rows(prototypes[c] + cfg.sigma_class * noise)
            videos.append(
                VideoRecord(
                    video_id=f"{prefix}_c{c:02d}_v{i:03d}",
                    label=c if labeled else -1,
                    frames=frames,
                )
            )
    return videos


def _shift_frames(
    frames: np.ndarray,
    rotation: np.ndarray,
    bias: np.ndarray,
    lam: float,
    sigma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    noise = sigma * rng.standard_normal(frames.shape)
    shifted = (1.0 - lam) * frames + lam * (frames @ rotation.T + bias) + noise
    return l2_normalize_rows(shifted)


def _to_student(
    frames: np.ndarray, mapping: np.ndarray, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    mapped = frames @ mapping.T + sigma * rng.standard_normal(
        (frames.shape[0], mapping.shape[0])
    )
    return l2_normalize_rows(mapped)


def generate_benchmark(cfg: SynthConfig, out_dir) -> BenchmarkManifest:
    """Generate all benchmark files into out_dir and return the manifest."""
    cfg.validate()
    os.makedirs(out_dir, exist_ok=True)
    names = _class_names(cfg)
    templates = list(DEFAULT_TEMPLATES[: cfg.num_templates])
    while len(templates) < cfg.num_templates:
        templates.append(f"synthetic template {len(templates)} of [CLS]")

    prototypes = l2_normalize_rows(
        _stream(cfg.seed, _S_PROTO).standard_normal((cfg.classes, cfg.teacher_dim))
    )

    text_rng = _stream(cfg.seed, _S_TEXT)
    text_rows = np.zeros((cfg.classes, cfg.num_templates, cfg.teacher_dim))
    for c in range(cfg.classes):
        noise = text_rng.standard_normal((cfg.num_templates, cfg.teacher_dim))
        text_rows[c] = l2_normalize_rows(prototypes[c] + cfg.sigma_text * noise)
    teacher_bank = TextBank(
        class_names=tuple(names),
        templates=tuple(templates),
        embeddings=text_rows,
        logit_temperature=cfg.logit_temperature,
    )

    source_videos = _make_videos(
        _stream(cfg.seed, _S_SOURCE), prototypes, cfg, "src", labeled=True
    )

    shift_rng = _stream(cfg.seed, _S_SHIFT)
    rotation = _random_rotation(shift_rng, cfg.teacher_dim)
    bias = cfg.bias_magnitude * shift_rng.standard_normal(cfg.teacher_dim)
    target_rng = _stream(cfg.seed, _S_TARGET)
    target_videos = []
    target_labels: Dict[str, int] = {}
    for vid in _make_videos(target_rng, prototypes, cfg, "tgt", labeled=True):
        frames = _shift_frames(vid.frames, rotation, bias, cfg.shift_lambda,
                               cfg.sigma_class, target_rng)
        target_videos.append(VideoRecord(vid.video_id, -1, frames))
        target_labels[vid.video_id] = vid.label

    cross_rng = _stream(cfg.seed, _S_CROSS)
    # semi-orthogonal map: an isometry onto a student_dim subspace, so the
    # student space is a genuinely different but still separable view
    gauss = cross_rng.standard_normal((cfg.teacher_dim, cfg.student_dim))
    mapping = np.linalg.qr(gauss)[0].T

    def student_videos(videos: List[VideoRecord], rng) -> List[VideoRecord]:
        return [
            VideoRecord(v.video_id, v.label,
                        _to_student(v.frames, mapping, cfg.sigma_cross, rng))
            for v in videos
        ]

    source_student = student_videos(source_videos, cross_rng)
    target_student = student_videos(target_videos, cross_rng)

    cross_text_rng = _stream(cfg.seed, _S_CROSS_TEXT)
    student_rows = np.zeros((cfg.classes, cfg.num_templates, cfg.student_dim))
    for c in range(cfg.classes):
        student_rows[c] = _to_student(text_rows[c], mapping, cfg.sigma_cross,
                                      cross_text_rng)
    student_bank = TextBank(
        class_names=tuple(names),
        templates=tuple(templates),
        embeddings=student_rows,
        logit_temperature=cfg.logit_temperature,
    )

    files = {
        "source_teacher": "source_teacher.emb",
        "target_teacher": "target_teacher.emb",
        "source_student": "source_student.emb",
        "target_student": "target_student.emb",
        "bank_teacher": "bank_teacher.txb",
        "bank_student": "bank_student.txb",
        "target_labels": "target_labels.csv",
    }
    dim_t, dim_s = cfg.teacher_dim, cfg.student_dim
    save_embeddings(EmbeddingDataset(dim_t, source_videos, "teacher"),
                    os.path.join(out_dir, files["source_teacher"]))
    save_embeddings(EmbeddingDataset(dim_t, target_videos, "teacher"),
                    os.path.join(out_dir, files["target_teacher"]))
    save_embeddings(EmbeddingDataset(dim_s, source_student, "student"),
                    os.path.join(out_dir, files["source_student"]))
    save_embeddings(EmbeddingDataset(dim_s, target_student, "student"),
                    os.path.join(out_dir, files["target_student"]))
    save_text_bank(teacher_bank, os.path.join(out_dir, files["bank_teacher"]))
    save_text_bank(student_bank, os.path.join(out_dir, files["bank_student"]))
    save_label_sidecar(target_labels, os.path.join(out_dir, files["target_labels"]))

    manifest = BenchmarkManifest(
        class_names=names,
        template_strings=templates,
        logit_temperature=cfg.logit_temperature,
        files=files,
    )
    save_manifest(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest
