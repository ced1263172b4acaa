"""Error hierarchy for the embedding exporter."""


class ExportError(Exception):
    """Base class for all exporter failures."""


class EncoderUnavailable(ExportError):
    """The requested encoder backend cannot be constructed on this host."""


class UndecodableImage(ExportError):
    """A frame file exists but cannot be decoded as an image."""


class EmptyVideoFolder(ExportError):
    """A video folder contains no frame images."""


class NoVideosFound(ExportError):
    """The input directory contains no video folders at all."""


class BadTemplate(ExportError):
    """A prompt template does not contain exactly one [CLS] placeholder."""


class EmptyClassList(ExportError):
    """The export job has no class names."""
