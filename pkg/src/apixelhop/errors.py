"""Exception types raised across the detector pipeline."""


class APixelHopError(Exception):
    """Base class for all pipeline errors."""


class DecodeError(APixelHopError):
    """A file could not be decoded as a PNG or JPEG image."""


class TooSmall(APixelHopError):
    """An image is smaller than one 16x16 block after preprocessing."""


class EmptyClass(APixelHopError):
    """A dataset class (real or fake) has no members."""


class InsufficientPatches(APixelHopError):
    """Too few patches to learn a Saab filter bank."""


class IndexOutOfRange(APixelHopError, IndexError):
    """A channel index outside the filter bank."""


class SingleClass(APixelHopError):
    """Labels contain only one class."""


class NonFinite(APixelHopError):
    """Input contains NaN or infinite values."""


class DimensionMismatch(APixelHopError):
    """Feature vector length differs from what the model expects."""


class NoPositives(APixelHopError):
    """Average precision requested on a set without positives."""


class FormatError(APixelHopError):
    """A model file is malformed or truncated."""


class IntegrityError(FormatError):
    """A model file's digest does not match its content."""


class UnsupportedVersion(APixelHopError):
    """A model file was written by an unknown format version."""


class InvariantViolation(APixelHopError):
    """A loaded model breaks a structural invariant."""


class DegenerateInputWarning(UserWarning):
    """All patch residuals are zero; AC kernels are an arbitrary basis."""
