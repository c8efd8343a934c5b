"""Exception types raised across the package."""


class HawpError(Exception):
    """Base class for all package errors."""


class DegeneratePoint(HawpError, ValueError):
    """A point maps to (or near) the line at infinity under a homography."""


class DegenerateHomography(HawpError, ValueError):
    pass


class DegenerateEncoding(HawpError, ValueError):
    """A point cannot be encoded against a segment (zero distance or endpoint foot)."""


class InvalidParameters(HawpError, ValueError):
    pass


class EmptyWireframe(HawpError, ValueError):
    pass


class NoJunctions(HawpError, ValueError):
    pass


class DimensionMismatch(HawpError, ValueError):
    pass


class ShapeMismatch(HawpError, ValueError):
    pass


class LengthMismatch(HawpError, ValueError):
    pass


class DomainError(HawpError, ValueError):
    pass


class SamplingFailed(HawpError, RuntimeError):
    pass


class FormatError(HawpError, ValueError):
    """A file does not follow the expected on-disk layout."""


class AllOneClassWarning(UserWarning):
    """Balanced cross-entropy fell back to the unbalanced form."""


class ClampWarning(UserWarning):
    """Probabilities were clamped away from 0 and 1."""


class IoFailure(HawpError, OSError):
    """A file could not be read or written."""
