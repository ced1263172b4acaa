"""Walk a directory of per-video frame folders, encode frames and class
prompts, and serialize everything to EMB1 + TXB1 + manifest files."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .encoders import make_encoder
from .errors import BadTemplate, EmptyClassList, EmptyVideoFolder, NoVideosFound
from .formats import write_embeddings, write_manifest, write_text_bank

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")

DEFAULT_TEMPLATES = (
    "a photo of action [CLS]",
    "a picture of action [CLS]",
    "Human action of [CLS]",
    "[CLS], an action",
    "[CLS] this is an action",
    "[CLS], a video of action",
    "Playing action of [CLS]",
    "[CLS]",
    "Playing a kind of action, [CLS]",
    "Doing a kind of action, [CLS]",
    "Look, the human is [CLS]",
    "Can you recognize the action of [CLS]?",
    "Video classification of [CLS]",
    "A video of [CLS]",
    "The man is [CLS]",
    "The woman is [CLS]",
)


@dataclass
class ExportJob:
    frames_dir: str                  # directory of per-video frame folders
    class_names: List[str]
    out_dir: str
    encoder: str = "hash-512"
    templates: List[str] = field(
        default_factory=lambda: list(DEFAULT_TEMPLATES))
    tag: str = "embeddings"          # manifest key / file stem
    k_max: int = 16                  # max frames kept per video
    label_from_prefix: bool = False  # video folder "classname__rest" -> label

    def validate(self) -> None:
        if not self.class_names:
            raise EmptyClassList("export job has no class names")
        for template in self.templates:
            if template.count("[CLS]") != 1:
                raise BadTemplate(
                    f"template {template!r} must contain exactly one [CLS]")
        if self.k_max < 1:
            raise BadTemplate(f"k_max must be >= 1, got {self.k_max}")


def sample_uniform(n: int, k_max: int) -> List[int]:
    """Indices of up to k_max frames spread uniformly over n frames."""
    if n <= k_max:
        return list(range(n))
    return sorted(set(np.round(np.linspace(0, n - 1, k_max)).astype(int)))


def _list_video_folders(frames_dir: str) -> List[str]:
    entries = sorted(
        e for e in os.listdir(frames_dir)
        if os.path.isdir(os.path.join(frames_dir, e))
    )
    if not entries:
        raise NoVideosFound(f"no video folders under {frames_dir}")
    return entries


def _list_frames(folder: str) -> List[str]:
    frames = sorted(
        os.path.join(folder, f) for f in os.listdir(folder)
        if f.lower().endswith(IMAGE_EXTENSIONS)
    )
    if not frames:
        raise EmptyVideoFolder(f"no frame images in {folder}")
    return frames


def _video_label(video_id: str, class_names: Sequence[str],
                 label_from_prefix: bool) -> int:
    if not label_from_prefix:
        return -1
    prefix = video_id.split("__", 1)[0]
    try:
        return class_names.index(prefix)
    except ValueError:
        return -1


def export_embeddings(job: ExportJob) -> Dict[str, str]:
    """Run the job; returns the manifest file map (relative paths)."""
    job.validate()
    encoder = make_encoder(job.encoder)
    os.makedirs(job.out_dir, exist_ok=True)

    videos = []
    for video_id in _list_video_folders(job.frames_dir):
        frames = _list_frames(os.path.join(job.frames_dir, video_id))
        picked = [frames[i] for i in sample_uniform(len(frames), job.k_max)]
        rows = encoder.encode_images(picked)
        label = _video_label(video_id, job.class_names, job.label_from_prefix)
        videos.append((video_id, label, rows))

    prompts = [
        template.replace("[CLS]", name)
        for name in job.class_names
        for template in job.templates
    ]
    text_rows = encoder.encode_texts(prompts).reshape(
        len(job.class_names), len(job.templates), encoder.dim)

    files = {
        job.tag: f"{job.tag}.emb",
        f"bank_{job.tag}": f"bank_{job.tag}.txb",
    }
    write_embeddings(videos, encoder.dim,
                     os.path.join(job.out_dir, files[job.tag]))
    write_text_bank(job.class_names, job.templates, text_rows,
                    encoder.logit_temperature,
                    os.path.join(job.out_dir, files[f"bank_{job.tag}"]))
    write_manifest(job.class_names, job.templates, encoder.logit_temperature,
                   files, os.path.join(job.out_dir, "manifest.json"))
    return files
