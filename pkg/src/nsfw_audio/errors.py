"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for every error this package raises on purpose."""


class FormatError(PipelineError):
    """A file does not conform to its declared on-disk format."""


class UnsupportedCodecError(PipelineError):
    """A WAV file uses an encoding this package does not decode."""


class UnsupportedVersionError(PipelineError):
    """A model file was written by an incompatible format version."""


class InvalidInputError(PipelineError):
    """An argument violates a documented precondition."""


class TooShortError(InvalidInputError):
    """Input has fewer samples than one analysis frame."""


class InsufficientDataError(PipelineError):
    """Not enough (or too degenerate) data to fit statistics or split a dataset."""


class ConfigError(PipelineError):
    """Configuration values are inconsistent or mismatched."""


class TrainingDivergedError(PipelineError):
    """Training produced non-finite gradients."""
