"""Numerical study of zero sets of Fourier transforms of convex body indicators."""

from .errors import (
    ConeViolationError, ConfigError, ConvexZerosError, DegenerateCurvatureError,
    DensityFailureError, DomainError, InsufficientDataError, MethodUnavailableError,
    NonUniqueMaximizerError, ResolutionError,
)
from .geometry import Ball, Body, NormalCone, make_body, parse_body_spec

__version__ = "0.1.0"
