"""
Initial-value problems and the benchmark systems shipped with the kit.

Problems are immutable descriptors. Right-hand sides and Jacobians are pure
callables ``(t, u) -> array`` so the same problem can be handed to the
spectral solver, the reference steppers and the diagnostics concurrently.
"""

from __future__ import annotations

import inspect
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .base import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    FloatArray,
    JacobianFunction,
    RhsFunction,
    ShapeError,
)
from .constants import (
    FD_STEP_FLOOR,
    FD_STEP_RELATIVE,
    LINEAR_LABELS,
    LINEAR_PARAMS,
    LINEAR_SPAN,
    LORENZ84_LABELS,
    LORENZ84_PARAMS,
    LORENZ84_SPAN,
    LORENZ84_U0,
    ROBERTSON_INITIAL_DT,
    ROBERTSON_LABELS,
    ROBERTSON_PARAMS,
    ROBERTSON_SPAN,
    ROBERTSON_U0,
    ROBERTSON_Y_SCALE,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True, eq=False)
class OdeProblem:
    """First-order system ``du/dt = rhs(t, u)`` with ``u(span[0]) = u0``."""

    name: str
    rhs: RhsFunction
    u0: FloatArray
    span: tuple[float, float]
    jacobian: Optional[JacobianFunction] = None
    params: Mapping[str, float] = field(default_factory=dict)
    labels: tuple[str, ...] = ()
    initial_dt: Optional[float] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)
    exact: Optional[Callable[[float], FloatArray]] = None

    def __post_init__(self) -> None:
        u0 = np.array(self.u0, dtype=float).reshape(-1)
        if u0.size == 0:
            raise ShapeError("Initial state must contain at least one variable.")
        if not np.all(np.isfinite(u0)):
            raise DomainError(f"Initial state must be finite, got {u0.tolist()}.")
        u0.setflags(write=False)

        start, end = (float(value) for value in self.span)
        if not (math.isfinite(start) and math.isfinite(end)) or end <= start:
            raise DomainError(f"Time span must be finite and increasing, got {self.span}.")

        labels = tuple(self.labels) or tuple(f"u{i}" for i in range(u0.size))
        if len(labels) != u0.size:
            raise ShapeError(f"Expected {u0.size} labels, got {len(labels)}.")

        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "span", (start, end))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def dim(self) -> int:
        return self.u0.size

    @property
    def duration(self) -> float:
        return self.span[1] - self.span[0]

    def evaluate_rhs(self, t: float, u) -> FloatArray:
        """Evaluate the right-hand side and check its shape."""

        values = np.asarray(self.rhs(t, np.asarray(u, dtype=float)), dtype=float)
        if values.shape != (self.dim,):
            raise ShapeError(
                f"{self.name} rhs returned shape {values.shape}, expected ({self.dim},)."
            )
        return values

    def jacobian_at(self, t: float, u) -> FloatArray:
        """Analytic Jacobian when available, central differences otherwise."""

        state = np.asarray(u, dtype=float)
        if self.jacobian is not None:
            matrix = np.asarray(self.jacobian(t, state), dtype=float)
            if matrix.shape != (self.dim, self.dim):
                raise ShapeError(
                    f"{self.name} jacobian returned shape {matrix.shape}, "
                    f"expected ({self.dim}, {self.dim})."
                )
            return matrix
        return central_difference_jacobian(self.rhs, t, state)

    def with_span(self, start: float, end: float) -> "OdeProblem":
        # The closed form is anchored at the original start time.
        exact = self.exact if float(start) == self.span[0] else None
        return replace(self, span=(start, end), exact=exact)

    def with_u0(self, u0) -> "OdeProblem":
        return replace(self, u0=u0, exact=None)


def central_difference_jacobian(rhs: RhsFunction, t: float, u: FloatArray) -> FloatArray:
    """Jacobian by central differences with step ``max(1e-7, 1e-7 |u_i|)``."""

    state = np.asarray(u, dtype=float)
    columns = []
    for i in range(state.size):
        step = max(FD_STEP_FLOOR, FD_STEP_RELATIVE * abs(state[i]))
        forward = state.copy()
        backward = state.copy()
        forward[i] += step
        backward[i] -= step
        column = (np.asarray(rhs(t, forward), float) - np.asarray(rhs(t, backward), float)) / (
            2.0 * step
        )
        columns.append(column)

    matrix = np.column_stack(columns)
    if not np.all(np.isfinite(matrix)):
        raise EvaluationError("Finite-difference Jacobian produced non-finite entries.")
    return matrix


class TrajectoryStatus(str, Enum):
    COMPLETED = "completed"
    STAGNATED = "stagnated"
    FAILED = "failed"


@dataclass(slots=True)
class Trajectory:
    """Accepted time/state samples produced by a step-by-step integrator."""

    times: FloatArray
    states: FloatArray
    steps_taken: int = 0
    steps_rejected: int = 0
    status: TrajectoryStatus = TrajectoryStatus.COMPLETED
    message: str = ""
    # Scaled local error estimate of every accepted step; 1.0 is the tolerance.
    error_norms: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape[0] != self.times.size:
            raise ShapeError(
                f"Trajectory has {self.times.size} times but {self.states.shape[0]} states."
            )
        self.status = TrajectoryStatus(self.status)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> FloatArray:
        return self.states[-1]

    @property
    def completed(self) -> bool:
        return self.status is TrajectoryStatus.COMPLETED

    def stats(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "steps_taken": self.steps_taken,
            "steps_rejected": self.steps_rejected,
            "t_reached": self.t_end,
            "message": self.message,
        }


def robertson(
    a: float = ROBERTSON_PARAMS["a"],
    b: float = ROBERTSON_PARAMS["b"],
    c: float = ROBERTSON_PARAMS["c"],
    *,
    span: Optional[Sequence[float]] = None,
) -> OdeProblem:
    """Robertson's stiff chemical kinetics system in (x, y, z)."""

    if min(a, b, c) <= 0:
        raise DomainError(f"Robertson rates must be positive, got a={a}, b={b}, c={c}.")

    def rhs(t: float, u: FloatArray) -> FloatArray:
        x, y, z = u
        return np.array(
            [
                -a * x + b * y * z,
                a * x - b * y * z - c * y * y,
                c * y * y,
            ]
        )

    def jacobian(t: float, u: FloatArray) -> FloatArray:
        x, y, z = u
        return np.array(
            [
                [-a, b * z, b * y],
                [a, -b * z - 2.0 * c * y, -b * y],
                [0.0, 2.0 * c * y, 0.0],
            ]
        )

    return OdeProblem(
        name="robertson",
        rhs=rhs,
        jacobian=jacobian,
        u0=ROBERTSON_U0,
        span=tuple(span) if span is not None else ROBERTSON_SPAN,
        params={"a": a, "b": b, "c": c},
        labels=ROBERTSON_LABELS,
        initial_dt=ROBERTSON_INITIAL_DT,
        # Integration starts at t = 0; plots start at the first log decade.
        metadata={
            "time_origin": 0.0,
            "plot_origin": ROBERTSON_INITIAL_DT,
            "scaled_columns": {"y": ROBERTSON_Y_SCALE},
        },
    )


def lorenz84(
    a: float = LORENZ84_PARAMS["a"],
    b: float = LORENZ84_PARAMS["b"],
    F: float = LORENZ84_PARAMS["F"],
    G: float = LORENZ84_PARAMS["G"],
    *,
    span: Optional[Sequence[float]] = None,
) -> OdeProblem:
    """Lorenz's 1984 Hadley circulation model in (X, Y, Z)."""

    def rhs(t: float, u: FloatArray) -> FloatArray:
        x, y, z = u
        return np.array(
            [
                -y * y - z * z - a * x + a * F,
                x * y - b * x * z - y + G,
                b * x * y + x * z - z,
            ]
        )

    def jacobian(t: float, u: FloatArray) -> FloatArray:
        x, y, z = u
        return np.array(
            [
                [-a, -2.0 * y, -2.0 * z],
                [y - b * z, x - 1.0, -b * x],
                [b * y + z, b * x, x - 1.0],
            ]
        )

    return OdeProblem(
        name="lorenz84",
        rhs=rhs,
        jacobian=jacobian,
        u0=LORENZ84_U0,
        span=tuple(span) if span is not None else LORENZ84_SPAN,
        params={"a": a, "b": b, "F": F, "G": G},
        labels=LORENZ84_LABELS,
    )


def linear_test(
    lam: float = LINEAR_PARAMS["lam"],
    u0: float = LINEAR_PARAMS["u0"],
    *,
    span: Optional[Sequence[float]] = None,
) -> OdeProblem:
    """Scalar test equation ``du/dt = lam * u`` with its closed-form solution."""

    start, end = tuple(span) if span is not None else LINEAR_SPAN

    def exact(t) -> FloatArray:
        times = np.asarray(t, dtype=float)
        return u0 * np.exp(lam * (times - start))[np.newaxis, ...]

    return OdeProblem(
        name="linear",
        rhs=lambda t, u: lam * u,
        jacobian=lambda t, u: np.array([[lam]]),
        u0=(u0,),
        span=(start, end),
        params={"lam": lam, "u0": u0},
        labels=LINEAR_LABELS,
        exact=exact,
    )


def linearized_problem(p: OdeProblem, t: float, state) -> OdeProblem:
    """Freeze the Jacobian of ``p`` at ``(t, state)``: ``d(du)/dt = J du``."""

    matrix = p.jacobian_at(t, state)
    matrix.setflags(write=False)

    return OdeProblem(
        name=f"{p.name}-linearized",
        rhs=lambda _t, du: matrix @ du,
        jacobian=lambda _t, _du: matrix,
        u0=np.zeros(p.dim),
        span=p.span,
        params=dict(p.params),
        labels=tuple(f"d{label}" for label in p.labels),
        metadata={"frozen_at": float(t), "state": [float(v) for v in np.asarray(state)]},
    )


PROBLEM_REGISTRY: dict[str, Callable[..., OdeProblem]] = {
    "robertson": robertson,
    "lorenz84": lorenz84,
    "linear": linear_test,
}


def available_problems() -> list[str]:
    return sorted(PROBLEM_REGISTRY)


def get_problem(
    name: str, *, span: Optional[Sequence[float]] = None, **params: float
) -> OdeProblem:
    """Build a registry problem, applying parameter overrides by name."""

    try:
        factory = PROBLEM_REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"Unknown problem {name!r}; available: {', '.join(available_problems())}."
        ) from None

    signature = inspect.signature(factory)
    unknown = sorted(key for key in params if key not in signature.parameters or key == "span")
    if unknown:
        accepted = [key for key in signature.parameters if key != "span"]
        raise ConfigurationError(
            f"Unknown parameter(s) {', '.join(unknown)} for {name}; "
            f"accepted: {', '.join(accepted)}."
        )
    return factory(**params, span=span)


def parse_param_overrides(items: Optional[Iterable[str]]) -> dict[str, float]:
    """Parse ``key=value`` strings into a float mapping."""

    overrides: dict[str, float] = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"Parameter override {item!r} must look like key=value.")
        try:
            overrides[key] = float(value)
        except ValueError as exc:
            raise ConfigurationError(
                f"Parameter {key} needs a numeric value, got {value!r}."
            ) from exc
    return overrides


__all__ = [
    "OdeProblem",
    "PROBLEM_REGISTRY",
    "Trajectory",
    "TrajectoryStatus",
    "available_problems",
    "central_difference_jacobian",
    "get_problem",
    "linear_test",
    "linearized_problem",
    "lorenz84",
    "parse_param_overrides",
    "robertson",
]
