"""Exception types shared across the package."""


class VocSmoothError(Exception):
    """Base class for all package errors."""


class ImageDecodeError(VocSmoothError, ValueError):
    """Raised when an image file cannot be decoded into an 8-bit gray/RGB raster."""


class FeatureFormatError(VocSmoothError, ValueError):
    """Raised for malformed FMAP feature files."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class FeatureTruncatedError(FeatureFormatError):
    """Declared FMAP dimensions do not match the payload size."""


class NumericalError(VocSmoothError, ArithmeticError):
    """An iterative solver failed to converge.

    ``residual`` carries the last relative residual reached.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
