"""Exception types shared across the package."""


class NotPsdError(ValueError):
    """Raised when a matrix expected to be symmetric PSD is not."""


class FeasibilityError(ValueError):
    """Raised when a prescribed covariance rank exceeds the available data rank."""


class IdxFormatError(ValueError):
    """Raised when an IDX container fails header or size validation."""
