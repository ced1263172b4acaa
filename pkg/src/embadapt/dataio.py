"""Binary embedding (EMB1) and text-bank (TXB1) formats, manifests,
label sidecars, and dataset alignment.

All integers are little-endian; payloads are float32 on disk and widened
to float64 on load.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    BadMagic,
    ClassCountMismatch,
    DataFormatError,
    DuplicateVideoId,
    IdSetMismatch,
    NonFiniteValue,
    NonUnitRow,
    TruncatedFile,
    ZeroFrames,
)
from .textspace import TextBank

EMB_MAGIC = b"EMB1"
TXB_MAGIC = b"TXB1"
FORMAT_VERSION = 1
UNIT_ROW_TOL = 1e-3


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    label: int  # -1 means unlabeled
    frames: np.ndarray  # (K, d) float64


@dataclass(frozen=True)
class EmbeddingDataset:
    embedding_dim: int
    videos: List[VideoRecord]
    space_tag: str = "teacher"

    def video_ids(self) -> List[str]:
        return [v.video_id for v in self.videos]

    def __len__(self) -> int:
        return len(self.videos)


class _Reader:
    """Sequential reader that reports truncation with the failing offset."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(
                f"{self.path}: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4", count=count)

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise DataFormatError(
                f"{self.path}: {len(self.data) - self.pos} unexpected trailing bytes"
            )


def _pack_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise DataFormatError(f"string too long for u16 length: {len(raw)} bytes")
    return struct.pack("<H", len(raw)) + raw


def save_embeddings(dataset: EmbeddingDataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, dataset.embedding_dim,
                             len(dataset.videos)))
        for vid in dataset.videos:
            fh.write(_pack_string(vid.video_id))
            fh.write(struct.pack("<iI", vid.label, vid.frames.shape[0]))
            fh.write(np.ascontiguousarray(vid.frames, dtype="<f4").tobytes())


def load_embeddings(path, space_tag: str = "teacher") -> EmbeddingDataset:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(4) != EMB_MAGIC:
        raise BadMagic(f"{path}: not an EMB1 file")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise BadMagic(f"{path}: unsupported EMB1 version {version}")
    dim = reader.u32()
    n_videos = reader.u32()
    videos: List[VideoRecord] = []
    seen = set()
    for _ in range(n_videos):
        video_id = reader.string()
        if video_id in seen:
            raise DuplicateVideoId(f"{path}: duplicate video id {video_id!r}")
        seen.add(video_id)
        label = reader.i32()
        k = reader.u32()
        if k == 0:
            raise ZeroFrames(f"{path}: video {video_id!r} has zero frames")
        frames = reader.f32_array(k * dim).astype(np.float64).reshape(k, dim)
        if not np.all(np.isfinite(frames)):
            raise NonFiniteValue(f"{path}: video {video_id!r} has NaN/Inf frames")
        videos.append(VideoRecord(video_id=video_id, label=label, frames=frames))
    reader.expect_end()
    return EmbeddingDataset(embedding_dim=dim, videos=videos, space_tag=space_tag)


def save_text_bank(bank: TextBank, path) -> None:
    c, t, d = bank.embeddings.shape
    with open(path, "wb") as fh:
        fh.write(TXB_MAGIC)
        fh.write(struct.pack("<IIIId", FORMAT_VERSION, d, c, t,
                             bank.logit_temperature))
        for name in bank.class_names:
            fh.write(_pack_string(name))
        for template in bank.templates:
            fh.write(_pack_string(template))
        fh.write(np.ascontiguousarray(bank.embeddings, dtype="<f4").tobytes())


def load_text_bank(path) -> TextBank:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(4) != TXB_MAGIC:
        raise BadMagic(f"{path}: not a TXB1 file")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise BadMagic(f"{path}: unsupported TXB1 version {version}")
    d = reader.u32()
    c = reader.u32()
    t = reader.u32()
    logit_temperature = reader.f64()
    if c < 2:
        raise ClassCountMismatch(f"{path}: need >= 2 classes, got {c}")
    if t < 1:
        raise ClassCountMismatch(f"{path}: need >= 1 template, got {t}")
    class_names = tuple(reader.string() for _ in range(c))
    templates = tuple(reader.string() for _ in range(t))
    rows = reader.f32_array(c * t * d).astype(np.float64).reshape(c, t, d)
    reader.expect_end()
    if not np.all(np.isfinite(rows)):
        raise NonFiniteValue(f"{path}: text bank has NaN/Inf rows")
    norms = np.linalg.norm(rows, axis=2)
    worst = float(np.max(np.abs(norms - 1.0)))
    if worst > UNIT_ROW_TOL:
        raise NonUnitRow(
            f"{path}: text row norm deviates from 1 by {worst:.3e} (> {UNIT_ROW_TOL})"
        )
    return TextBank(class_names=class_names, templates=templates, embeddings=rows,
                    logit_temperature=logit_temperature)


@dataclass
class BenchmarkManifest:
    """JSON manifest tying together the files of one benchmark directory."""

    class_names: List[str]
    template_strings: List[str]
    logit_temperature: float
    files: Dict[str, str] = field(default_factory=dict)
    # expected keys: source_teacher, target_teacher, source_student,
    # target_student, bank_teacher, bank_student, target_labels


MANIFEST_FILE_KEYS = (
    "source_teacher", "target_teacher", "source_student", "target_student",
    "bank_teacher", "bank_student", "target_labels",
)


def save_manifest(manifest: BenchmarkManifest, path) -> None:
    doc = {
        "class_names": manifest.class_names,
        "template_strings": manifest.template_strings,
        "logit_temperature": manifest.logit_temperature,
        "files": manifest.files,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> BenchmarkManifest:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON ({exc})") from exc
    for key in ("class_names", "template_strings", "logit_temperature", "files"):
        if key not in doc:
            raise DataFormatError(f"{path}: manifest missing key {key!r}")
    return BenchmarkManifest(
        class_names=list(doc["class_names"]),
        template_strings=list(doc["template_strings"]),
        logit_temperature=float(doc["logit_temperature"]),
        files=dict(doc["files"]),
    )


def align_by_id(
    a: EmbeddingDataset, b: EmbeddingDataset
) -> Tuple[EmbeddingDataset, EmbeddingDataset]:
    """Reorder both datasets to their sorted common ids; the id sets must
    match exactly."""
    ids_a = set(a.video_ids())
    ids_b = set(b.video_ids())
    if ids_a != ids_b:
        only_a = sorted(ids_a - ids_b)
        only_b = sorted(ids_b - ids_a)
        raise IdSetMismatch(
            f"id sets differ: {len(only_a)} only in first ({only_a[:5]}...), "
            f"{len(only_b)} only in second ({only_b[:5]}...)"
        )
    order = sorted(ids_a)
    map_a = {v.video_id: v for v in a.videos}
    map_b = {v.video_id: v for v in b.videos}
    return (
        EmbeddingDataset(a.embedding_dim, [map_a[i] for i in order], a.space_tag),
        EmbeddingDataset(b.embedding_dim, [map_b[i] for i in order], b.space_tag),
    )


def save_label_sidecar(labels: Dict[str, int], path) -> None:
    """Evaluation-only label sidecar: video_id,label CSV in sorted id order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "label"])
        for video_id in sorted(labels):
            writer.writerow([video_id, labels[video_id]])


def load_label_sidecar(path) -> Dict[str, int]:
    labels: Dict[str, int] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            labels[row["video_id"]] = int(row["label"])
    return labels


def resolve_labels(dataset: EmbeddingDataset,
                   sidecar: Optional[Dict[str, int]] = None) -> List[int]:
    """Per-video labels, preferring the dataset's own, falling back to the
    sidecar. Raises if any video remains unlabeled."""
    from .errors import MissingLabels

    labels = []
    for vid in dataset.videos:
        label = vid.label
        if label < 0 and sidecar is not None:
            label = sidecar.get(vid.video_id, -1)
        if label < 0:
            raise MissingLabels(f"video {vid.video_id!r} has no label")
        labels.append(label)
    return labels
