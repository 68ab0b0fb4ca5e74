"""
Base abstractions shared by the spectral core, the reference steppers and the CLI.

Evaluators are plain callables so problems can be defined with lambdas,
closures or bound methods. Every failure raised by the library derives from
``GwrmError`` so callers (the adaptive controller, the CLI) can decide
whether to shrink an interval, retry a step or abort the run.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]


class GwrmError(RuntimeError):
    """Non-recoverable solver failure."""


class ConfigurationError(GwrmError, ValueError):
    """Raised when a config object, registry lookup or override is invalid."""


class DomainError(GwrmError, ValueError):
    """Raised when an argument lies outside the domain an operation accepts."""


class ShapeError(GwrmError, ValueError):
    """Raised when sample or coefficient arrays have the wrong shape."""


class EvaluationError(GwrmError):
    """Raised when a right-hand side or map produces non-finite values."""


class DivergenceError(GwrmError):
    """Raised when an iterate becomes non-finite."""


class SingularSystemError(GwrmError):
    """Raised when the Newton matrix cannot be factorized."""


class ConvergenceError(GwrmError):
    """Raised when an interval solve exhausts its iteration budget."""

    def __init__(self, message: str, *, stats=None) -> None:
        super().__init__(message)
        self.stats = stats


class UnsupportedAccuracyError(GwrmError, ValueError):
    """Raised when a mode estimate is requested for an uncalibrated accuracy."""


class RhsFunction(Protocol):
    """Right-hand side ``du/dt = F(t, u)`` of a first-order system."""

    def __call__(self, t: float, u: FloatArray) -> FloatArray:
        ...


class JacobianFunction(Protocol):
    """Jacobian ``dF/du`` evaluated at ``(t, u)``."""

    def __call__(self, t: float, u: FloatArray) -> FloatArray:
        ...


class FixedPointMap(Protocol):
    """Map ``x -> phi(x)`` whose fixed point a solver is asked to find."""

    def __call__(self, x: FloatArray) -> FloatArray:
        ...


__all__ = [
    "ConfigurationError",
    "ConvergenceError",
    "DivergenceError",
    "DomainError",
    "EvaluationError",
    "FixedPointMap",
    "FloatArray",
    "GwrmError",
    "JacobianFunction",
    "RhsFunction",
    "ShapeError",
    "SingularSystemError",
    "UnsupportedAccuracyError",
]
