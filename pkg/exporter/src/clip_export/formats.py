"""Writers for the EMB1 / TXB1 binary formats and the JSON manifest.

Byte layout (all integers little-endian, payloads float32):

EMB1: magic "EMB1", u32 version=1, u32 dim, u32 n_videos, then per video
u16 id length + utf-8 id, i32 label (-1 = unlabeled), u32 frame count K,
K*dim float32 rows.

TXB1: magic "TXB1", u32 version=1, u32 dim, u32 n_classes C, u32
n_templates T, f64 logit temperature, C length-prefixed class names,
T length-prefixed templates, C*T*dim float32 rows.

Writes are atomic: a temp file in the target directory is populated and
then renamed over the destination.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from typing import Dict, List, Sequence, Tuple

import numpy as np

EMB_MAGIC = b"EMB1"
TXB_MAGIC = b"TXB1"
VERSION = 1


def _atomic_write(path, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".export-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def write_embeddings(videos: Sequence[Tuple[str, int, np.ndarray]],
                     dim: int, path) -> None:
    """videos: iterable of (video_id, label, (K, dim) float array)."""
    parts = [EMB_MAGIC, struct.pack("<III", VERSION, dim, len(videos))]
    for video_id, label, frames in videos:
        parts.append(_pack_str(video_id))
        parts.append(struct.pack("<iI", label, frames.shape[0]))
        parts.append(np.ascontiguousarray(frames, dtype="<f4").tobytes())
    _atomic_write(path, b"".join(parts))


def write_text_bank(class_names: Sequence[str], templates: Sequence[str],
                    rows: np.ndarray, logit_temperature: float, path) -> None:
    """rows: (C, T, dim) float array of unit text embeddings."""
    c, t, dim = rows.shape
    parts = [TXB_MAGIC,
             struct.pack("<IIIId", VERSION, dim, c, t, logit_temperature)]
    parts.extend(_pack_str(name) for name in class_names)
    parts.extend(_pack_str(template) for template in templates)
    parts.append(np.ascontiguousarray(rows, dtype="<f4").tobytes())
    _atomic_write(path, b"".join(parts))


def write_manifest(class_names: List[str], templates: List[str],
                   logit_temperature: float, files: Dict[str, str],
                   path) -> None:
    doc = {
        "class_names": list(class_names),
        "template_strings": list(templates),
        "logit_temperature": logit_temperature,
        "files": files,
    }
    payload = (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
    _atomic_write(path, payload)
