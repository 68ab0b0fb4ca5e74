"""
Timed solver runs and the records they leave behind.

``run_method`` dispatches a problem to the spectral solver or one of the
reference steppers, measures wall time with a monotonic clock and returns a
``RunRecord`` whose fields are plain JSON values.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Mapping, Optional, Union

import numpy as np

from .base import ConfigurationError, DomainError
from .formatters import sample_times
from .gwrm import GwrmConfig, GwrmSolution, solve_adaptive
from .problems import OdeProblem, Trajectory
from .refsolvers import StepperConfig, rk4_adaptive, trapezoid_adaptive
from .sir import SolverConfig

logger = logging.getLogger(__name__)

METHODS = ("gwrm", "rk4", "trapezoid")

RunResult = Union[GwrmSolution, Trajectory]


def default_newton() -> SolverConfig:
    return SolverConfig(mode="newton", jacobian_reuse=1, max_iters=20)


@dataclass(slots=True)
class MethodSettings:
    """Per-method configuration used by ``run_method``."""

    gwrm: GwrmConfig = field(default_factory=GwrmConfig)
    stepper: StepperConfig = field(default_factory=StepperConfig)
    newton: SolverConfig = field(default_factory=default_newton)

    def snapshot(self, method: str) -> dict[str, Any]:
        if method == "gwrm":
            return {"gwrm": self.gwrm.as_dict()}
        if method == "trapezoid":
            return {"stepper": self.stepper.as_dict(), "newton": self.newton.as_dict()}
        return {"stepper": self.stepper.as_dict()}


@dataclass(slots=True)
class RunRecord:
    """Everything needed to reproduce one run and the row it contributes to a comparison."""

    problem: str
    params: dict[str, float]
    method: str
    config: dict[str, Any]
    wall_time: float
    stats: dict[str, Any]
    outputs: dict[str, str] = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(
                f"Unknown method {self.method!r}; expected one of {', '.join(METHODS)}."
            )
        if self.wall_time < 0:
            raise DomainError(f"Wall time must be non-negative, got {self.wall_time}.")

    @property
    def completed(self) -> bool:
        return self.stats.get("status") == "completed"

    @property
    def work(self) -> Optional[int]:
        """Accepted intervals for the spectral solver, accepted steps otherwise."""

        if "interval_count" in self.stats:
            return self.stats["interval_count"]
        return self.stats.get("steps_taken")

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "RunRecord":
        try:
            return cls(
                problem=payload["problem"],
                params=dict(payload.get("params") or {}),
                method=payload["method"],
                config=dict(payload.get("config") or {}),
                wall_time=float(payload["wall_time"]),
                stats=dict(payload.get("stats") or {}),
                outputs=dict(payload.get("outputs") or {}),
                seed=payload.get("seed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"Malformed run record: {exc}") from exc

    def row(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "status": self.stats.get("status"),
            "completed": self.completed,
            "work": self.work,
            "wall_time": self.wall_time,
            "max_error": self.stats.get("max_error"),
        }


_RUNNERS: dict[str, Callable[[OdeProblem, MethodSettings], RunResult]] = {
    "gwrm": lambda p, s: solve_adaptive(p, s.gwrm),
    "rk4": lambda p, s: rk4_adaptive(p, s.stepper),
    "trapezoid": lambda p, s: trapezoid_adaptive(p, s.stepper, s.newton),
}


def run_method(
    problem: OdeProblem,
    method: str,
    settings: Optional[MethodSettings] = None,
    seed: Optional[int] = None,
) -> tuple[RunResult, RunRecord]:
    """Solve ``problem`` with ``method`` and time the run."""

    try:
        runner = _RUNNERS[method]
    except KeyError:
        raise ConfigurationError(
            f"Unknown method {method!r}; expected one of {', '.join(METHODS)}."
        ) from None

    settings = settings or MethodSettings()
    started = time.perf_counter()
    result = runner(problem, settings)
    elapsed = time.perf_counter() - started

    record = RunRecord(
        problem=problem.name,
        params=dict(problem.params),
        method=method,
        config={"span": list(problem.span), **settings.snapshot(method)},
        wall_time=elapsed,
        stats=result.stats(),
        seed=seed,
    )
    logger.info(
        "%s on %s finished in %.3fs (%s)", method, problem.name, elapsed, record.stats["status"]
    )
    return result, record


def result_series(
    result: RunResult,
    problem: OdeProblem,
    samples: int = 1000,
    spacing: str = "linear",
) -> tuple[np.ndarray, np.ndarray]:
    """
    Output samples of a run as ``(times, N x M values)``.

    Spectral runs are sampled on a grid over the span they reached;
    trajectories report one sample per accepted step.
    """
    if isinstance(result, Trajectory):
        return result.times, result.states.T
    if not result.pieces:
        raise DomainError(f"{problem.name} run produced no intervals.")

    times = sample_times(
        result.start, result.end, samples, spacing, origin=problem.metadata.get("plot_origin")
    )
    return times, result.sample(times)


def max_abs_error(times: np.ndarray, values: np.ndarray, reference: Callable) -> float:
    """Largest absolute deviation from a dense reference over the given samples."""

    expected = np.asarray(reference(np.asarray(times, dtype=float)), dtype=float)
    return float(np.max(np.abs(values - expected)))


__all__ = [
    "METHODS",
    "MethodSettings",
    "RunRecord",
    "default_newton",
    "max_abs_error",
    "result_series",
    "run_method",
]
