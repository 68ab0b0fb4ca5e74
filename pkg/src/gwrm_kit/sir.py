"""
Semi-implicit root solver for fixed-point systems ``x = phi(x)``.

Three modes share one loop:

* ``picard`` iterates ``x <- phi(x)``;
* ``newton`` applies ``x <- x + (I - J_phi)^{-1} (phi(x) - x)``;
* ``semi_implicit`` scales the Newton step by a damping factor that is
  halved whenever the residual fails to decrease and doubled back towards 1
  after every successful step.

Jacobians are refreshed every ``jacobian_reuse`` iterations and factorized
once per refresh with a dense LU decomposition.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, ClassVar, Mapping, Optional

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .base import (
    ConfigurationError,
    DivergenceError,
    EvaluationError,
    FixedPointMap,
    FloatArray,
    SingularSystemError,
)
from .constants import FD_STEP_FLOOR, FD_STEP_RELATIVE

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class SolverConfig:
    """Fixed-point solver settings."""

    MODES: ClassVar[tuple[str, ...]] = ("picard", "newton", "semi_implicit")

    mode: str = "semi_implicit"
    tol: float = 1e-10
    max_iters: int = 50
    jacobian_reuse: int = 3
    damping_init: float = 1.0
    min_damping: float = 1e-6

    def __post_init__(self) -> None:
        if self.mode not in self.MODES:
            raise ConfigurationError(
                f"Unknown solver mode {self.mode!r}; expected one of {', '.join(self.MODES)}."
            )
        if not self.tol > 0:
            raise ConfigurationError(f"Solver tolerance must be positive, got {self.tol}.")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be at least 1, got {self.max_iters}.")
        if self.jacobian_reuse < 1:
            raise ConfigurationError(
                f"jacobian_reuse must be at least 1, got {self.jacobian_reuse}."
            )
        if not 0 < self.damping_init <= 1:
            raise ConfigurationError(
                f"damping_init must lie in (0, 1], got {self.damping_init}."
            )

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, payload: Optional[Mapping[str, Any]]) -> "SolverConfig":
        if not payload:
            return cls()

        casts: dict[str, Callable[[Any], Any]] = {
            "mode": str,
            "tol": float,
            "max_iters": int,
            "jacobian_reuse": int,
            "damping_init": float,
            "min_damping": float,
        }
        try:
            values = {key: cast(payload[key]) for key, cast in casts.items() if key in payload}
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"Invalid solver setting: {exc}") from exc
        return cls(**values)


@dataclass(slots=True)
class SolveStats:
    """Outcome of one fixed-point solve."""

    iterations: int = 0
    final_residual: float = math.inf
    jacobian_evals: int = 0
    converged: bool = False
    map_evals: int = 0
    residuals: list[float] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload.pop("residuals")
        return payload


def _residual_norm(values: FloatArray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def jacobian_fd(phi: FixedPointMap, x, f0: Optional[FloatArray] = None) -> FloatArray:
    """
    Forward-difference Jacobian of ``phi`` at ``x``.

    Column ``j`` uses the step ``max(1e-7, 1e-7 * |x_j|)``. ``f0`` may carry
    an already computed ``phi(x)``.

    Raises:
        EvaluationError: If ``phi`` is non-finite at ``x`` or a perturbed point.
    """
    point = np.asarray(x, dtype=float)
    flat = point.reshape(-1)

    base = np.asarray(phi(point) if f0 is None else f0, dtype=float).reshape(-1)
    if not np.all(np.isfinite(base)):
        raise EvaluationError("Map is non-finite at the linearization point.")

    matrix = np.empty((base.size, flat.size))
    for j in range(flat.size):
        step = max(FD_STEP_FLOOR, FD_STEP_RELATIVE * abs(flat[j]))
        shifted = flat.copy()
        shifted[j] += step
        values = np.asarray(phi(shifted.reshape(point.shape)), dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise EvaluationError(f"Map is non-finite after perturbing component {j}.")
        matrix[:, j] = (values - base) / step
    return matrix


def _factorize(matrix: FloatArray):
    if not np.all(np.isfinite(matrix)):
        raise SingularSystemError("Newton matrix contains non-finite entries.")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(matrix, check_finite=False)

    if np.any(np.diag(lu) == 0.0):
        raise SingularSystemError("Newton matrix I - J is singular.")
    return lu, piv


def solve_fixed_point(
    phi: FixedPointMap,
    x0,
    cfg: Optional[SolverConfig] = None,
    *,
    jacobian: Optional[Callable[[FloatArray], FloatArray]] = None,
) -> tuple[FloatArray, SolveStats]:
    """
    Solve ``x = phi(x)`` starting from ``x0``.

    Args:
        phi: Map whose fixed point is sought; called with arrays shaped like ``x0``.
        x0: Initial guess.
        cfg (SolverConfig, optional): Mode, tolerance and iteration budget.
        jacobian: Optional exact ``d phi / d x`` (flattened, square). Forward
            differences are used when omitted.

    Returns:
        tuple: ``(x, stats)``. When ``stats.converged`` is true,
        ``max|phi(x) - x| <= cfg.tol``. Exhausting ``max_iters`` is reported
        through ``stats`` rather than raised.

    Raises:
        DivergenceError: If an iterate or its image becomes non-finite.
        SingularSystemError: If ``I - J_phi`` cannot be factorized.
    """
    cfg = cfg or SolverConfig()
    start = np.array(x0, dtype=float)
    shape = start.shape
    stats = SolveStats()

    def mapped(vector: FloatArray) -> FloatArray:
        stats.map_evals += 1
        return np.asarray(phi(vector.reshape(shape)), dtype=float).reshape(-1)

    def image(vector: FloatArray) -> FloatArray:
        if not np.all(np.isfinite(vector)):
            raise DivergenceError(f"Iterate became non-finite after {stats.iterations} iterations.")
        values = mapped(vector)
        if not np.all(np.isfinite(values)):
            raise DivergenceError(f"Map became non-finite after {stats.iterations} iterations.")
        return values

    x = start.reshape(-1).copy()
    fx = image(x)
    residual = _residual_norm(fx - x)
    stats.residuals.append(residual)

    beta = cfg.damping_init if cfg.mode == "semi_implicit" else 1.0
    factor = None
    age = 0
    identity = np.eye(x.size)

    while residual > cfg.tol and stats.iterations < cfg.max_iters:
        stats.iterations += 1

        if cfg.mode == "picard":
            x = fx
            fx = image(x)
            residual = _residual_norm(fx - x)
            stats.residuals.append(residual)
            continue

        if factor is None or age >= cfg.jacobian_reuse:
            if jacobian is not None:
                matrix = np.asarray(jacobian(x.reshape(shape)), dtype=float)
            else:
                matrix = jacobian_fd(mapped, x, f0=fx)
            factor = _factorize(identity - matrix)
            stats.jacobian_evals += 1
            age = 0

        step = lu_solve(factor, fx - x, check_finite=False)
        age += 1

        if cfg.mode == "newton":
            x = x + step
            fx = image(x)
            residual = _residual_norm(fx - x)
            stats.residuals.append(residual)
            continue

        candidate = x + beta * step
        try:
            f_candidate = image(candidate)
            candidate_residual = _residual_norm(f_candidate - candidate)
        except DivergenceError:
            candidate_residual = math.inf

        if candidate_residual < residual:
            x, fx, residual = candidate, f_candidate, candidate_residual
            beta = min(1.0, 2.0 * beta)
        else:
            beta *= 0.5
            factor = None
            logger.debug(
                "Residual %.3e did not decrease; damping reduced to %.3e", residual, beta
            )
            if beta < cfg.min_damping:
                stats.residuals.append(residual)
                break
        stats.residuals.append(residual)

    stats.final_residual = residual
    stats.converged = residual <= cfg.tol
    if not stats.converged:
        logger.debug(
            "Fixed-point solve stopped after %d iterations with residual %.3e",
            stats.iterations,
            residual,
        )
    return x.reshape(shape), stats


__all__ = [
    "SolveStats",
    "SolverConfig",
    "jacobian_fd",
    "solve_fixed_point",
]
