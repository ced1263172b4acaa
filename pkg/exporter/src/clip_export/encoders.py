"""Encoder backends mapping images and prompt strings to unit embeddings.

Two families:

- ``hash-<dim>``: a fully offline, deterministic encoder. Images are
  downsampled to a fixed thumbnail and text is hashed into character
  trigram counts; both are pushed through fixed seeded random projections
  and L2-normalized. No pretrained weights, no network, bitwise
  reproducible -- intended for pipeline plumbing and tests.
- ``clip-<model>``: a real pretrained dual encoder loaded via
  `transformers`. Constructing it raises EncoderUnavailable when the
  package or the weights are not present locally.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EncoderUnavailable, UndecodableImage

_THUMB = 16          # hash encoder thumbnail side
_TEXT_BUCKETS = 2048  # hashed trigram vocabulary size


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    return mat / np.maximum(norms, 1e-12)


def _seed_from(name: str, purpose: str) -> int:
    digest = hashlib.sha256(f"{name}:{purpose}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class HashEncoder:
    """Deterministic random-projection encoder; a stand-in with the same
    interface and output geometry as a real dual encoder."""

    logit_temperature = 0.01

    def __init__(self, name: str, dim: int):
        self.name = name
        self.dim = dim
        pixels = 3 * _THUMB * _THUMB
        img_rng = np.random.Generator(
            np.random.Philox(key=_seed_from(name, "image")))
        txt_rng = np.random.Generator(
            np.random.Philox(key=_seed_from(name, "text")))
        self._img_proj = img_rng.standard_normal((dim, pixels)) / np.sqrt(pixels)
        self._txt_proj = txt_rng.standard_normal((dim, _TEXT_BUCKETS)) / np.sqrt(
            _TEXT_BUCKETS)

    def encode_images(self, paths) -> np.ndarray:
        rows = np.zeros((len(paths), 3 * _THUMB * _THUMB))
        for i, path in enumerate(paths):
            try:
                with Image.open(path) as img:
                    rgb = img.convert("RGB").resize((_THUMB, _THUMB),
                                                    Image.BILINEAR)
            except (UnidentifiedImageError, OSError) as exc:
                raise UndecodableImage(f"{path}: {exc}") from exc
            rows[i] = np.asarray(rgb, dtype=np.float64).ravel() / 255.0
        rows -= 0.5
        return _unit_rows(rows @ self._img_proj.T)

    def encode_texts(self, texts) -> np.ndarray:
        rows = np.zeros((len(texts), _TEXT_BUCKETS))
        for i, text in enumerate(texts):
            padded = f"  {text.lower()}  "
            for j in range(len(padded) - 2):
                trigram = padded[j:j + 3]
                bucket = int.from_bytes(
                    hashlib.blake2s(trigram.encode(), digest_size=4).digest(),
                    "little") % _TEXT_BUCKETS
                rows[i, bucket] += 1.0
            rows[i] /= max(np.linalg.norm(rows[i]), 1.0)
        return _unit_rows(rows @ self._txt_proj.T)


class ClipEncoder:
    """Pretrained dual encoder via transformers; optional heavyweight path."""

    def __init__(self, name: str, model_id: str):
        self.name = name
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderUnavailable(
                f"{name}: torch/transformers not installed ({exc})") from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id)
            self._processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise EncoderUnavailable(
                f"{name}: cannot load weights for {model_id!r} ({exc})") from exc
        self._model.eval()
        self.dim = int(self._model.config.projection_dim)
        self.logit_temperature = float(
            1.0 / self._model.logit_scale.exp().item())

    def encode_images(self, paths) -> np.ndarray:
        import torch

        images = []
        for path in paths:
            try:
                with Image.open(path) as img:
                    images.append(img.convert("RGB"))
            except (UnidentifiedImageError, OSError) as exc:
                raise UndecodableImage(f"{path}: {exc}") from exc
        inputs = self._processor(images=images, return_tensors="pt")
        with torch.no_grad():
            feats = self._model.get_image_features(**inputs)
        return _unit_rows(feats.numpy().astype(np.float64))

    def encode_texts(self, texts) -> np.ndarray:
        import torch

        inputs = self._processor(text=list(texts), return_tensors="pt",
                                 padding=True, truncation=True)
        with torch.no_grad():
            feats = self._model.get_text_features(**inputs)
        return _unit_rows(feats.numpy().astype(np.float64))


def make_encoder(identifier: str):
    """``hash-<dim>`` or ``clip-<model id>``."""
    if identifier.startswith("hash-"):
        try:
            dim = int(identifier.split("-", 1)[1])
        except ValueError as exc:
            raise EncoderUnavailable(
                f"bad hash encoder spec {identifier!r}; expected hash-<dim>"
            ) from exc
        if dim < 4:
            raise EncoderUnavailable(f"{identifier}: dim must be >= 4")
        return HashEncoder(identifier, dim)
    if identifier.startswith("clip-"):
        return ClipEncoder(identifier, identifier.split("-", 1)[1])
    raise EncoderUnavailable(
        f"unknown encoder {identifier!r}; expected hash-<dim> or clip-<model>")
