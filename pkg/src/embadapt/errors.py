"""Exception hierarchy shared by all embadapt modules.

ValidationError subclasses map to CLI exit code 1, DataFormatError
subclasses to exit code 2.
"""


class EmbAdaptError(Exception):
    """Base class for all embadapt errors."""


class ValidationError(EmbAdaptError):
    """Bad values, shapes, or domain-level preconditions."""


class DataFormatError(EmbAdaptError):
    """Malformed or unreadable on-disk payloads."""


# --- numeric kernels ---

class NearZeroNorm(ValidationError):
    pass


class NonPositiveTemperature(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass


class NonFiniteInput(ValidationError):
    pass


# --- text space / prototypes ---

class EmptyTemplateSubset(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class EmptyVideo(ValidationError):
    pass


# --- adapter ---

class DimTooSmall(ValidationError):
    pass


class StaleCache(ValidationError):
    pass


# --- losses ---

class AlphaOutOfRange(ValidationError):
    pass


# --- optimizer ---

class ShapeMismatch(ValidationError):
    pass


class NonFiniteGradient(ValidationError):
    pass


# --- pseudo-labeling ---

class PercentileOutOfRange(ValidationError):
    pass


class MisalignedBundle(ValidationError):
    pass


# --- data I/O ---

class BadMagic(DataFormatError):
    pass


class TruncatedFile(DataFormatError):
    pass


class DuplicateVideoId(DataFormatError):
    pass


class ZeroFrames(DataFormatError):
    pass


class NonFiniteValue(DataFormatError):
    pass


class NonUnitRow(DataFormatError):
    pass


class ClassCountMismatch(DataFormatError):
    pass


class IdSetMismatch(ValidationError):
    pass


# --- synth / pipeline / cli ---

class InvalidConfig(ValidationError):
    pass


class UnlabeledSourceVideo(ValidationError):
    pass


class EmptyAfterFiltering(ValidationError):
    pass


class MissingLabels(ValidationError):
    pass


class ConfigParseError(ValidationError):
    pass
