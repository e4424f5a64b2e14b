"""Exception and warning classes raised across the toolkit."""


class FlatCamError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FlatCamError, ValueError):
    """Invalid parameters or configuration."""


class NotMaximalLength(FlatCamError):
    """LFSR cycle is shorter than 2**degree - 1 (polynomial not primitive)."""


class ZeroSeed(ValidationError):
    pass


class WrongForm(ValidationError):
    """Mask is in the wrong representation (signed vs optical)."""


class NotPowerOfTwo(ValidationError):
    pass


class BadFraction(ValidationError):
    pass


class WidthTooLarge(ValidationError):
    pass


class OutOfFieldOfView(FlatCamError):
    """Mask pattern does not cover every shift required by the geometry."""


class BadSampling(ValidationError):
    pass


class TooLarge(FlatCamError):
    pass


class DimensionMismatch(FlatCamError, ValueError):
    pass


class ZeroInput(FlatCamError, ValueError):
    pass


class MissingCapture(FlatCamError):
    pass


class InconsistentFactor(FlatCamError):
    pass


class AllSingularValuesTruncated(FlatCamError):
    pass


class NonFiniteObjective(FlatCamError, FloatingPointError):
    pass


class DidNotConverge(UserWarning):
    """Iterative solver hit ``max_iters``; the best iterate is still returned."""
