"""
Steepness metric and smoothing reformulations of an initial-value problem.

Two transforms are provided, both returning ordinary ``OdeProblem`` objects
of dimension ``2N`` that any solver in the kit accepts:

* time integration (TI): solve for ``v = integral of u + A t`` and recover ``u``
  by differentiation; the long-time average ``W = (v - A t) / t`` comes for free;
* time averaging (TA): solve for the two-point average ``V`` and the slope
  ``P = dU/dt`` of the running average ``U``, then integrate ``P``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad_vec, solve_ivp

from .base import DomainError, FloatArray, ShapeError
from .chebyshev import (
    ChebSeries,
    PiecewiseSeries,
    differentiate,
    evaluate,
    integrate_from_start,
)
from .constants import STEEPNESS_POINTS_PER_MODE
from .gwrm import GwrmConfig, GwrmSolution, solve_adaptive
from .problems import OdeProblem, Trajectory

logger = logging.getLogger(__name__)

SeriesSource = Union[ChebSeries, PiecewiseSeries, GwrmSolution, Trajectory, tuple]


@dataclass(frozen=True, slots=True)
class SteepnessReport:
    """Normalized maximum slope of one variable."""

    S: float
    argmax_t: float
    u_max: float
    u_min: float
    variable: int = 0

    def as_dict(self) -> dict[str, float]:
        return {
            "S": self.S,
            "argmax_t": self.argmax_t,
            "u_max": self.u_max,
            "u_min": self.u_min,
            "variable": self.variable,
        }


def _dense_series_samples(pieces, variable: int) -> tuple[FloatArray, FloatArray, FloatArray]:
    times, values, slopes = [], [], []
    for piece in pieces:
        if variable >= piece.dim:
            raise ShapeError(f"Variable {variable} out of range for dimension {piece.dim}.")
        count = STEEPNESS_POINTS_PER_MODE * max(piece.order, 1)
        grid = np.linspace(piece.interval.t0, piece.interval.t1, count)
        times.append(grid)
        values.append(evaluate(piece, grid)[variable])
        slopes.append(evaluate(differentiate(piece), grid)[variable])
    return np.concatenate(times), np.concatenate(values), np.concatenate(slopes)


def _trajectory_samples(times, states, variable: int) -> tuple[FloatArray, FloatArray, FloatArray]:
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if states.ndim == 2:
        if variable >= states.shape[1]:
            raise ShapeError(f"Variable {variable} out of range for {states.shape[1]} columns.")
        states = states[:, variable]
    if times.size < 3 or states.shape != times.shape:
        raise ShapeError("Sampled input needs at least 3 matching time/value samples.")
    return times, states, np.gradient(states, times, edge_order=2)


def steepness(source: SeriesSource, variable: int = 0) -> SteepnessReport:
    """
    Steepness ``S = max|du/dt| / ((u_max - u_min) / T)`` of one variable.

    Series inputs are sampled on ``1000 * K`` points per piece and use the
    exact derivative series; sampled inputs (a ``Trajectory`` or a
    ``(times, values)`` pair) use second-order finite differences.

    Raises:
        DomainError: If the variable is constant over the interval.
    """
    if isinstance(source, ChebSeries):
        times, values, slopes = _dense_series_samples([source], variable)
    elif isinstance(source, (PiecewiseSeries, GwrmSolution)):
        times, values, slopes = _dense_series_samples(list(source.pieces), variable)
    elif isinstance(source, Trajectory):
        times, values, slopes = _trajectory_samples(source.times, source.states, variable)
    else:
        times, values = source
        times, values, slopes = _trajectory_samples(times, values, variable)

    u_max = float(np.max(values))
    u_min = float(np.min(values))
    if not u_max > u_min:
        raise DomainError(f"Variable {variable} is constant; steepness is undefined.")

    duration = float(times[-1] - times[0])
    index = int(np.argmax(np.abs(slopes)))
    return SteepnessReport(
        S=float(abs(slopes[index]) * duration / (u_max - u_min)),
        argmax_t=float(times[index]),
        u_max=u_max,
        u_min=u_min,
        variable=variable,
    )


def _offset(A, dim: int) -> FloatArray:
    if A is None:
        return np.zeros(dim)
    try:
        return np.broadcast_to(np.asarray(A, dtype=float), (dim,)).copy()
    except ValueError as exc:
        raise ShapeError(f"Offset A must be a scalar or have {dim} entries.") from exc


def transform_ti(p: OdeProblem, A=None) -> OdeProblem:
    """
    Time-integration transform in ``(v, w)`` with ``w = dv/dt``.

    ``dv/dt = w`` and ``dw/dt = F(t, w - A)`` with ``v(t_start) = 0`` and
    ``w(t_start) = u0 + A``; times are measured from the span start.
    """
    n = p.dim
    offset = _offset(A, n)
    offset.setflags(write=False)

    def rhs(t: float, state: FloatArray) -> FloatArray:
        w = state[n:]
        return np.concatenate([w, p.rhs(t, w - offset)])

    def jacobian(t: float, state: FloatArray) -> FloatArray:
        matrix = np.zeros((2 * n, 2 * n))
        matrix[:n, n:] = np.eye(n)
        matrix[n:, n:] = p.jacobian_at(t, state[n:] - offset)
        return matrix

    return OdeProblem(
        name=f"{p.name}-ti",
        rhs=rhs,
        jacobian=jacobian,
        u0=np.concatenate([np.zeros(n), p.u0 + offset]),
        span=p.span,
        params=dict(p.params),
        labels=tuple(f"v_{label}" for label in p.labels)
        + tuple(f"w_{label}" for label in p.labels),
        initial_dt=p.initial_dt,
        metadata={"transform": "ti", "source": p.name, "offset": offset.tolist()},
    )


def transform_lta(p: OdeProblem) -> OdeProblem:
    """Long-time-averaging form ``d2Z/dt2 = F(t, dZ/dt)``, identical to TI with ``A = 0``."""

    problem = transform_ti(p, None)
    return replace(
        problem,
        name=f"{p.name}-lta",
        labels=tuple(f"Z_{label}" for label in p.labels)
        + tuple(f"dZ_{label}" for label in p.labels),
        metadata={"transform": "lta", "source": p.name},
    )


def auto_ti_offset(p: OdeProblem, cfg: Optional[GwrmConfig] = None) -> FloatArray:
    """Estimate ``A = -(u(T) - u0) / T`` from a coarse solve of ``p``."""

    base = cfg or GwrmConfig()
    coarse = GwrmConfig(
        order=base.order,
        epsilon=max(base.epsilon, 1e-2),
        initial_dt=base.initial_dt,
        max_dt=base.max_dt,
        solver=base.solver,
    )
    solution = solve_adaptive(p, coarse)
    if not solution.pieces:
        raise DomainError(f"Coarse solve of {p.name} produced no intervals: {solution.message}")

    elapsed = solution.end - p.span[0]
    u_end = solution.evaluate(solution.end)
    offset = -(u_end - p.u0) / elapsed
    logger.info("Automatic TI offset for %s: %s", p.name, offset.tolist())
    return offset


def recover_from_ti(
    v_solution: Union[GwrmSolution, PiecewiseSeries], A=None
) -> tuple[PiecewiseSeries, Callable]:
    """
    Recover ``u = dv/dt - A`` and the long-time average ``W`` from a TI solve.

    Returns:
        tuple: ``(u, W)`` where ``u`` is piecewise and ``W(t) = (v(t) - A t) / t``
        with ``t`` measured from the span start; ``W`` at the start returns
        ``u`` there.
    """
    series = v_solution.series if isinstance(v_solution, GwrmSolution) else v_solution
    n = series.dim // 2
    offset = _offset(A, n)
    v = series.component(range(n))

    def to_u(piece: ChebSeries) -> ChebSeries:
        coeffs = differentiate(piece).coeffs.copy()
        coeffs[:, 0] -= 2.0 * offset
        return ChebSeries(piece.interval, coeffs)

    u = v.map_pieces(to_u)
    origin = v.start
    u_origin = u.evaluate(origin)

    def long_time_average(t):
        times = np.asarray(t, dtype=float)
        elapsed = times - origin
        values = v.evaluate(times)
        if times.ndim == 0:
            if elapsed == 0.0:
                return u_origin.copy()
            return (values - offset * elapsed) / elapsed

        result = np.empty_like(values)
        positive = elapsed > 0.0
        result[:, positive] = (
            values[:, positive] - np.outer(offset, elapsed[positive])
        ) / elapsed[positive]
        result[:, ~positive] = u_origin[:, np.newaxis]
        return result

    return u, long_time_average


@dataclass(frozen=True, slots=True, eq=False)
class TaTransform:
    """Time-averaged problem in ``(P, V)`` plus what is needed to rebuild ``U``."""

    problem: OdeProblem
    delta: float
    U0: FloatArray
    source: str

    @property
    def span(self) -> tuple[float, float]:
        return self.problem.span


def transform_ta(
    p: OdeProblem, delta: float, warmup_tol: float = 1e-10, *, warmup_method: str = "DOP853"
) -> TaTransform:
    """
    Time-averaging transform with half-width ``delta``.

    With ``u(t +/- delta) = V +/- delta P`` the averaged system reads::

        dP/dt = (F(t + delta, V + delta P) - F(t - delta, V - delta P)) / (2 delta)
        dV/dt = (F(t + delta, V + delta P) + F(t - delta, V - delta P)) / 2

    Initial values at ``t_start + delta`` come from a warm-up integration of
    ``p`` over ``[t_start, t_start + 2 delta]``; the averaged problem lives on
    the shifted span ``[t_start + delta, t_end - delta]``.
    """
    if not delta > 0:
        raise DomainError(f"Averaging half-width must be positive, got {delta}.")
    start, end = p.span
    if end - start <= 2.0 * delta:
        raise DomainError(
            f"Span {p.span} is too short for averaging half-width {delta} (needs > {2 * delta})."
        )

    warm = solve_ivp(
        p.rhs,
        (start, start + 2.0 * delta),
        p.u0,
        method=warmup_method,
        rtol=warmup_tol,
        atol=warmup_tol * 1e-2,
        dense_output=True,
    )
    if not warm.success:
        raise DomainError(f"Warm-up integration of {p.name} failed: {warm.message}")

    window, _ = quad_vec(
        lambda s: warm.sol(s), start, start + 2.0 * delta, epsabs=1e-13, epsrel=1e-12
    )
    u_left = p.u0
    u_right = warm.y[:, -1]
    n = p.dim

    def rhs(t: float, state: FloatArray) -> FloatArray:
        slope, average = state[:n], state[n:]
        ahead = p.rhs(t + delta, average + delta * slope)
        behind = p.rhs(t - delta, average - delta * slope)
        return np.concatenate([(ahead - behind) / (2.0 * delta), 0.5 * (ahead + behind)])

    def jacobian(t: float, state: FloatArray) -> FloatArray:
        slope, average = state[:n], state[n:]
        ahead = p.jacobian_at(t + delta, average + delta * slope)
        behind = p.jacobian_at(t - delta, average - delta * slope)
        mean = 0.5 * (ahead + behind)
        half_diff = 0.5 * (ahead - behind)
        return np.block([[mean, half_diff / delta], [delta * half_diff, mean]])

    problem = OdeProblem(
        name=f"{p.name}-ta",
        rhs=rhs,
        jacobian=jacobian,
        u0=np.concatenate([(u_right - u_left) / (2.0 * delta), 0.5 * (u_right + u_left)]),
        span=(start + delta, end - delta),
        params=dict(p.params),
        labels=tuple(f"P_{label}" for label in p.labels)
        + tuple(f"V_{label}" for label in p.labels),
        initial_dt=p.initial_dt,
        metadata={"transform": "ta", "source": p.name, "delta": delta},
    )
    U0 = np.asarray(window, dtype=float) / (2.0 * delta)
    U0.setflags(write=False)
    return TaTransform(problem=problem, delta=delta, U0=U0, source=p.name)


def recover_from_ta(
    solution: Union[GwrmSolution, PiecewiseSeries], ta: TaTransform
) -> PiecewiseSeries:
    """Running average ``U`` obtained by integrating ``P`` from ``U0`` piece by piece."""

    series = solution.series if isinstance(solution, GwrmSolution) else solution
    n = series.dim // 2
    slope = series.component(range(n))

    pieces = []
    level = np.asarray(ta.U0, dtype=float)
    for piece in slope:
        integral = integrate_from_start(piece).coeffs.copy()
        integral[:, 0] += 2.0 * level
        averaged = ChebSeries(piece.interval, integral)
        pieces.append(averaged)
        level = evaluate(averaged, piece.interval.t1)
    return PiecewiseSeries(tuple(pieces))


def running_average_oracle(u: Callable, delta: float, t: float):
    """
    Running average ``U(t) = (1 / 2 delta) * integral of u over [t - delta, t + delta]``.

    Adaptive quadrature with absolute tolerance 1e-10; used as a test oracle.

    Raises:
        DomainError: If ``u`` is undefined somewhere in the window.
    """
    if not delta > 0:
        raise DomainError(f"Averaging half-width must be positive, got {delta}.")

    try:
        total, _ = quad_vec(
            lambda s: np.asarray(u(s), dtype=float),
            t - delta,
            t + delta,
            epsabs=1e-10,
            epsrel=1e-12,
        )
    except ValueError as exc:
        raise DomainError(f"Evaluator is undefined in [{t - delta}, {t + delta}]: {exc}") from exc

    average = np.asarray(total, dtype=float) / (2.0 * delta)
    if not np.all(np.isfinite(average)):
        raise DomainError(f"Evaluator is not finite in [{t - delta}, {t + delta}].")
    return float(average) if average.ndim == 0 else average


def total_coefficients(solution: GwrmSolution) -> int:
    """Chebyshev coefficients consumed by a run, counted over every variable."""

    return sum(piece.dim * (piece.order + 1) for piece in solution.pieces)


def smoothing_ledger(p: OdeProblem, cfg: Optional[GwrmConfig] = None, A=None) -> dict[str, int]:
    """Coefficients consumed by a direct solve and by the TI-transformed solve at equal settings."""

    cfg = cfg or GwrmConfig()
    direct = solve_adaptive(p, cfg)
    transformed = solve_adaptive(transform_ti(p, A), cfg)
    return {
        "direct_intervals": direct.interval_count,
        "direct_coefficients": total_coefficients(direct),
        "ti_intervals": transformed.interval_count,
        "ti_coefficients": total_coefficients(transformed),
    }


__all__ = [
    "SteepnessReport",
    "TaTransform",
    "auto_ti_offset",
    "recover_from_ta",
    "recover_from_ti",
    "running_average_oracle",
    "smoothing_ledger",
    "steepness",
    "total_coefficients",
    "transform_lta",
    "transform_ta",
    "transform_ti",
]
