"""Exception types raised across the package."""


class ConvexZerosError(Exception):
    """Base class for all package errors."""


class DomainError(ConvexZerosError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class MethodUnavailableError(ConvexZerosError):
    """The requested evaluation route does not support this body or dimension."""


class ResolutionError(ConvexZerosError, ValueError):
    """A quadrature or sampling resolution is too coarse for the request."""


class NonUniqueMaximizerError(ConvexZerosError):
    """The support function has no unique maximizer (flat face direction)."""


class ConeViolationError(ConvexZerosError, ValueError):
    """A frequency lies outside the normal cone where an estimate is valid."""


class DegenerateCurvatureError(ConvexZerosError):
    """Zero Gaussian curvature at the stationary point; no phase model exists."""


class InsufficientDataError(ConvexZerosError, ValueError):
    """Too few points or rows for the requested statistic."""


class DensityFailureError(ConvexZerosError):
    """A candidate spectrum is too sparse to run the difference-set pipeline."""


class ConfigError(ConvexZerosError, ValueError):
    """Invalid experiment or body configuration."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
