"""Export image-frame and prompt embeddings into EMB1/TXB1 files."""

from .encoders import ClipEncoder, HashEncoder, make_encoder
from .errors import (
    BadTemplate,
    EmptyClassList,
    EmptyVideoFolder,
    EncoderUnavailable,
    ExportError,
    NoVideosFound,
    UndecodableImage,
)
from .exporter import DEFAULT_TEMPLATES, ExportJob, export_embeddings, sample_uniform

__version__ = "0.1.0"

__all__ = [
    "BadTemplate",
    "ClipEncoder",
    "DEFAULT_TEMPLATES",
    "EmptyClassList",
    "EmptyVideoFolder",
    "EncoderUnavailable",
    "ExportError",
    "ExportJob",
    "HashEncoder",
    "NoVideosFound",
    "UndecodableImage",
    "export_embeddings",
    "make_encoder",
    "sample_uniform",
]
