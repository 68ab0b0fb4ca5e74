"""
Reference time steppers used as baselines for the spectral solver.

Both adaptive steppers estimate the local error by step doubling: one step of
length ``h`` is compared with two steps of ``h / 2`` and the finer result is
kept. Errors are measured in the mixed norm
``max_i |e_i| / (abs_tol + rel_tol * |u_i|)`` so that a value of 1 sits exactly
on the tolerance. ``u`` is the last accepted state, and a non-finite trial
state is always rejected.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .base import (
    ConfigurationError,
    ConvergenceError,
    DivergenceError,
    EvaluationError,
    FloatArray,
    RhsFunction,
    SingularSystemError,
)
from .problems import OdeProblem, Trajectory, TrajectoryStatus
from .sir import SolverConfig, solve_fixed_point

logger = logging.getLogger(__name__)

_NEWTON_FAILURES = (ConvergenceError, DivergenceError, EvaluationError, SingularSystemError)


@dataclass(slots=True)
class StepperConfig:
    """
    Adaptive stepper settings.

    ``h_max`` defaults to the problem span. A run is declared stagnated when
    ``stagnation_window`` consecutive accepted steps each advance time by
    less than ``stagnation_fraction`` of the span, when ``max_steps``
    accepted steps do not reach the end of the span, or when the step size
    collapses to ``h_min`` with a finite error still above tolerance.
    """

    rel_tol: float = 1e-3
    abs_tol: float = 1e-6
    h0: float = 0.1
    h_min: float = 1e-14
    h_max: Optional[float] = None
    max_steps: int = 100_000
    stagnation_window: int = 10_000
    stagnation_fraction: float = 1e-6
    safety: float = 0.9

    def __post_init__(self) -> None:
        if not (self.rel_tol >= 0 and self.abs_tol >= 0 and self.rel_tol + self.abs_tol > 0):
            raise ConfigurationError(
                f"Tolerances must be non-negative and not both zero, got "
                f"rel_tol={self.rel_tol}, abs_tol={self.abs_tol}."
            )
        upper = math.inf if self.h_max is None else self.h_max
        if not 0 < self.h_min <= self.h0 <= upper:
            raise ConfigurationError(
                f"Expected 0 < h_min <= h0 <= h_max, got {self.h_min}, {self.h0}, {self.h_max}."
            )
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be at least 1, got {self.max_steps}.")
        if self.stagnation_window < 1:
            raise ConfigurationError("stagnation_window must be at least 1.")
        if not 0 < self.safety <= 1:
            raise ConfigurationError(f"safety must lie in (0, 1], got {self.safety}.")

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, payload: Optional[Mapping[str, Any]]) -> "StepperConfig":
        if not payload:
            return cls()

        casts: dict[str, Callable[[Any], Any]] = {
            "rel_tol": float,
            "abs_tol": float,
            "h0": float,
            "h_min": float,
            "h_max": float,
            "max_steps": int,
            "stagnation_window": int,
            "stagnation_fraction": float,
            "safety": float,
        }
        try:
            values = {
                key: cast(payload[key])
                for key, cast in casts.items()
                if payload.get(key) not in (None, "")
            }
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"Invalid stepper setting: {exc}") from exc
        return cls(**values)


def _error_norm(error: FloatArray, accepted: FloatArray, cfg: StepperConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(accepted)
    return float(np.max(np.abs(error) / scale))


def _step_factor(error: float, exponent: float, cfg: StepperConfig) -> float:
    if error == 0.0:
        return 5.0
    return float(np.clip(cfg.safety * error ** (-exponent), 0.2, 5.0))


def rk4_step(rhs: RhsFunction, t: float, u: FloatArray, h: float) -> FloatArray:
    """One classical fourth-order Runge-Kutta step."""

    k1 = rhs(t, u)
    k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2)
    k4 = rhs(t + h, u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def trapezoid_step(
    p: OdeProblem, t: float, u: FloatArray, h: float, newton: Optional[SolverConfig] = None
) -> FloatArray:
    """
    One implicit trapezoid step ``u1 = u + h/2 (f(t, u) + f(t + h, u1))``.

    The implicit equation is solved as the fixed point of
    ``x -> u + h/2 f(t, u) + h/2 f(t + h, x)`` with Newton's method.

    Raises:
        ConvergenceError: If Newton does not reach the tolerance.
    """
    newton = newton or SolverConfig(mode="newton", jacobian_reuse=1, max_iters=20)
    t_next = t + h
    explicit = u + 0.5 * h * p.evaluate_rhs(t, u)

    def phi(x: FloatArray) -> FloatArray:
        return explicit + 0.5 * h * p.evaluate_rhs(t_next, x)

    def jacobian(x: FloatArray) -> FloatArray:
        return 0.5 * h * p.jacobian_at(t_next, x)

    solution, stats = solve_fixed_point(phi, u, newton, jacobian=jacobian)
    if not stats.converged:
        raise ConvergenceError(
            f"Trapezoid Newton solve failed at t={t:.6g}, h={h:.3e} "
            f"(residual {stats.final_residual:.3e}).",
            stats=stats,
        )
    return solution


class _Recorder:
    """Collects accepted steps and tracks stagnation."""

    def __init__(self, p: OdeProblem, cfg: StepperConfig) -> None:
        self.times = [p.span[0]]
        self.states = [p.u0.copy()]
        self.error_norms: list[float] = []
        self.rejected = 0
        self.slow_run = 0
        self.slow_threshold = cfg.stagnation_fraction * p.duration
        self.window = cfg.stagnation_window

    @property
    def taken(self) -> int:
        return len(self.times) - 1

    def accept(self, t: float, u: FloatArray, h: float, error: float) -> bool:
        """Record a step; returns True when the stagnation window is full."""

        self.times.append(t)
        self.states.append(u)
        self.error_norms.append(error)
        self.slow_run = self.slow_run + 1 if h < self.slow_threshold else 0
        return self.slow_run >= self.window

    def trajectory(self, status: TrajectoryStatus, message: str = "") -> Trajectory:
        return Trajectory(
            times=np.array(self.times),
            states=np.array(self.states),
            steps_taken=self.taken,
            steps_rejected=self.rejected,
            status=status,
            message=message,
            error_norms=self.error_norms,
        )


def _march(
    p: OdeProblem,
    cfg: StepperConfig,
    attempt: Callable[[float, FloatArray, float], tuple[FloatArray, FloatArray]],
    order: int,
    divisor: float,
    name: str,
) -> Trajectory:
    t, t_end = p.span
    u = p.u0.copy()
    h_max = cfg.h_max or p.duration
    h = min(cfg.h0, h_max)
    end_slack = 1e-12 * max(abs(t_end), p.duration)
    recorder = _Recorder(p, cfg)
    exponent = 1.0 / (order + 1)

    while t_end - t > end_slack:
        if recorder.taken >= cfg.max_steps:
            message = f"{name}: step budget of {cfg.max_steps} exhausted at t={t:.6g}."
            logger.warning(message)
            return recorder.trajectory(TrajectoryStatus.STAGNATED, message)

        step = min(h, t_end - t)
        try:
            coarse, fine = attempt(t, u, step)
        except _NEWTON_FAILURES as exc:
            recorder.rejected += 1
            if step <= cfg.h_min:
                message = f"{name}: step collapsed below h_min at t={t:.6g}: {exc}"
                logger.warning(message)
                return recorder.trajectory(TrajectoryStatus.FAILED, message)
            h = max(0.5 * step, cfg.h_min)
            continue

        if np.all(np.isfinite(fine)) and np.all(np.isfinite(coarse)):
            error = _error_norm((fine - coarse) / divisor, u, cfg)
        else:
            error = math.inf

        if error <= 1.0:
            t = t_end if step == t_end - t else t + step
            u = fine
            if recorder.accept(t, u, step, error):
                message = (
                    f"{name}: {cfg.stagnation_window} consecutive steps shorter than "
                    f"{recorder.slow_threshold:.3e} near t={t:.6g}."
                )
                logger.warning(message)
                return recorder.trajectory(TrajectoryStatus.STAGNATED, message)
            h = min(step * _step_factor(error, exponent, cfg), h_max)
            continue

        recorder.rejected += 1
        if step <= cfg.h_min:
            if math.isfinite(error):
                message = f"{name}: step size collapsed to h_min near t={t:.6g}."
                logger.warning(message)
                return recorder.trajectory(TrajectoryStatus.STAGNATED, message)
            message = f"{name}: trial state is non-finite at h_min near t={t:.6g}."
            logger.warning(message)
            return recorder.trajectory(TrajectoryStatus.FAILED, message)
        h = max(step * _step_factor(error, exponent, cfg), cfg.h_min)

    logger.info(
        "%s on %s: %d steps, %d rejected", name, p.name, recorder.taken, recorder.rejected
    )
    return recorder.trajectory(TrajectoryStatus.COMPLETED)


def rk4_adaptive(p: OdeProblem, cfg: Optional[StepperConfig] = None) -> Trajectory:
    """
    Classical RK4 with step-doubling error control.

    The error estimate is ``|u_{2 x h/2} - u_h| / 15`` and the step factor
    ``safety * (1 / error)^(1/5)`` is clipped to ``[0.2, 5]``.
    """
    cfg = cfg or StepperConfig()

    def attempt(t: float, u: FloatArray, h: float) -> tuple[FloatArray, FloatArray]:
        coarse = rk4_step(p.evaluate_rhs, t, u, h)
        half = rk4_step(p.evaluate_rhs, t, u, 0.5 * h)
        return coarse, rk4_step(p.evaluate_rhs, t + 0.5 * h, half, 0.5 * h)

    with np.errstate(over="ignore", invalid="ignore"):
        return _march(p, cfg, attempt, order=4, divisor=15.0, name="rk4")


def trapezoid_adaptive(
    p: OdeProblem, cfg: Optional[StepperConfig] = None, newton: Optional[SolverConfig] = None
) -> Trajectory:
    """
    Implicit trapezoid rule with step-halving error control.

    The error estimate is ``|u_{2 x h/2} - u_h| / 3`` with controller
    exponent 1/3. A failed Newton solve halves the step.
    """
    cfg = cfg or StepperConfig()
    newton = newton or SolverConfig(mode="newton", jacobian_reuse=1, max_iters=20)

    def attempt(t: float, u: FloatArray, h: float) -> tuple[FloatArray, FloatArray]:
        coarse = trapezoid_step(p, t, u, h, newton)
        half = trapezoid_step(p, t, u, 0.5 * h, newton)
        return coarse, trapezoid_step(p, t + 0.5 * h, half, 0.5 * h, newton)

    return _march(p, cfg, attempt, order=2, divisor=3.0, name="trapezoid")


def _fixed_grid(p: OdeProblem, h: float) -> FloatArray:
    if not h > 0:
        raise ConfigurationError(f"Step must be positive, got {h}.")
    count = max(1, int(math.ceil(p.duration / h - 1e-9)))
    grid = p.span[0] + h * np.arange(count + 1)
    grid[-1] = p.span[1]
    return grid


def _fixed_march(p: OdeProblem, h: float, step: Callable, name: str) -> Trajectory:
    grid = _fixed_grid(p, h)
    states = [p.u0.copy()]
    for t, t_next in zip(grid[:-1], grid[1:]):
        with np.errstate(over="ignore", invalid="ignore"):
            u = step(t, states[-1], t_next - t)
        if not np.all(np.isfinite(u)):
            message = f"{name}: state became non-finite after t={t:.6g}."
            logger.warning(message)
            return Trajectory(
                times=grid[: len(states)],
                states=np.array(states),
                steps_taken=len(states) - 1,
                status=TrajectoryStatus.FAILED,
                message=message,
            )
        states.append(u)
    return Trajectory(times=grid, states=np.array(states), steps_taken=len(grid) - 1)


def rk4_fixed(p: OdeProblem, h: float) -> Trajectory:
    """RK4 with a constant step (the last step is shortened to hit the span end)."""

    return _fixed_march(p, h, lambda t, u, dt: rk4_step(p.evaluate_rhs, t, u, dt), "rk4")


def trapezoid_fixed(p: OdeProblem, h: float, newton: Optional[SolverConfig] = None) -> Trajectory:
    """Implicit trapezoid with a constant step."""

    return _fixed_march(p, h, lambda t, u, dt: trapezoid_step(p, t, u, dt, newton), "trapezoid")


def observed_order(errors: Sequence[float], steps: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""

    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if errors.size < 2 or errors.size != steps.size:
        raise ConfigurationError("Need at least two matching (error, step) pairs.")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)


def reference_solution(
    p: OdeProblem, rtol: float = 1e-10, atol: Optional[float] = None, method: str = "Radau"
):
    """
    Dense high-accuracy reference from ``scipy.integrate.solve_ivp``.

    Returns the ``OdeSolution`` interpolant: called with a time it gives the
    state vector, with an array of M times an ``N x M`` matrix.

    Raises:
        ConvergenceError: If the reference integration fails.
    """
    result = solve_ivp(
        p.evaluate_rhs,
        p.span,
        p.u0,
        method=method,
        rtol=rtol,
        atol=rtol * 1e-2 if atol is None else atol,
        jac=p.jacobian_at if method in ("Radau", "BDF", "LSODA") else None,
        dense_output=True,
    )
    if not result.success:
        raise ConvergenceError(f"Reference {method} run on {p.name} failed: {result.message}")
    logger.debug("Reference %s run on %s used %d steps", method, p.name, result.t.size - 1)
    return result.sol


__all__ = [
    "StepperConfig",
    "observed_order",
    "reference_solution",
    "rk4_adaptive",
    "rk4_fixed",
    "rk4_step",
    "trapezoid_adaptive",
    "trapezoid_fixed",
    "trapezoid_step",
]
