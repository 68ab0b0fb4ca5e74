"""
Chebyshev-in-time weighted residual solver with adaptive interval lengths.

On each time interval the solution is the fixed point of the coefficient map

    phi(a) = 2 delta_k0 b + integral from t0 of interp_{K-1}( F(t_j, u_a(t_j)), j = 1..K )

where ``b`` carries the initial state of the interval and the right-hand side
is applied pointwise at the Lobatto nodes after ``t0``. The interpolant has
degree ``K-1``, so its integral has order ``K`` and ``t1`` is a collocation
node. Stiff modes are damped instead of carried across intervals.

Intervals are chained causally: each one starts from the end value of the
previous accepted piece, and its length is adapted with the tail ratio of the
accepted coefficients.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, ClassVar, Mapping, Optional, Sequence

import numpy as np

from .base import (
    ConfigurationError,
    ConvergenceError,
    DivergenceError,
    EvaluationError,
    FloatArray,
    ShapeError,
    SingularSystemError,
)
from .chebyshev import (
    ChebSeries,
    Interval,
    PiecewiseSeries,
    chebyshev_matrices,
    collocation_matrix,
    evaluate,
    extrapolate,
    fit,
    lobatto_nodes,
    tail_ratio,
)
from .problems import OdeProblem
from .sir import SolverConfig, SolveStats, solve_fixed_point

logger = logging.getLogger(__name__)

_RECOVERABLE = (ConvergenceError, EvaluationError, DivergenceError, SingularSystemError)


@dataclass(slots=True)
class GwrmConfig:
    """
    Adaptive interval settings.

    Unset interval lengths are derived from the problem: ``initial_dt`` falls
    back to the problem hint, then to 1% of the span; ``max_dt`` to the span;
    ``min_dt`` to the smaller of ``1e-6 * initial_dt`` and ``1e-12 * span``.
    """

    GUESSES: ClassVar[tuple[str, ...]] = ("constant", "extrapolate")
    JACOBIANS: ClassVar[tuple[str, ...]] = ("analytic", "finite_difference")

    order: int = 8
    epsilon: float = 1e-3
    initial_dt: Optional[float] = None
    min_dt: Optional[float] = None
    max_dt: Optional[float] = None
    shrink: float = 0.5
    grow: float = 1.5
    grow_threshold: float = 0.1
    initial_guess: str = "constant"
    jacobian: str = "analytic"
    max_intervals: int = 100_000
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self) -> None:
        if self.order < 2:
            raise ConfigurationError(f"Temporal order K must be at least 2, got {self.order}.")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}.")
        if not 0 < self.shrink < 1 < self.grow:
            raise ConfigurationError(
                f"Expected 0 < shrink < 1 < grow, got shrink={self.shrink}, grow={self.grow}."
            )
        if not 0 < self.grow_threshold <= 1:
            raise ConfigurationError(
                f"grow_threshold must lie in (0, 1], got {self.grow_threshold}."
            )
        if self.initial_guess not in self.GUESSES:
            raise ConfigurationError(f"Unknown initial guess {self.initial_guess!r}.")
        if self.jacobian not in self.JACOBIANS:
            raise ConfigurationError(f"Unknown Jacobian source {self.jacobian!r}.")
        for name in ("initial_dt", "min_dt", "max_dt"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"{name} must be positive, got {value}.")
        if self.max_intervals < 1:
            raise ConfigurationError("max_intervals must be at least 1.")

    def resolve_steps(self, problem: OdeProblem) -> tuple[float, float, float]:
        """Return concrete ``(initial_dt, min_dt, max_dt)`` for ``problem``."""

        span = problem.duration
        max_dt = self.max_dt or span
        initial_dt = min(self.initial_dt or problem.initial_dt or span / 100.0, max_dt)
        min_dt = self.min_dt or min(initial_dt * 1e-6, span * 1e-12)
        if not 0 < min_dt <= initial_dt <= max_dt:
            raise ConfigurationError(
                f"Expected 0 < min_dt <= initial_dt <= max_dt, got "
                f"{min_dt}, {initial_dt}, {max_dt}."
            )
        return initial_dt, min_dt, max_dt

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, payload: Optional[Mapping[str, Any]]) -> "GwrmConfig":
        """Build a config from loosely typed values such as a parsed config file."""

        if not payload:
            return cls()

        casts: dict[str, Callable[[Any], Any]] = {
            "order": int,
            "epsilon": float,
            "initial_dt": float,
            "min_dt": float,
            "max_dt": float,
            "shrink": float,
            "grow": float,
            "grow_threshold": float,
            "initial_guess": str,
            "jacobian": str,
            "max_intervals": int,
        }
        data = dict(payload)
        if "K" in data and "order" not in data:
            data["order"] = data.pop("K")
        try:
            values = {
                key: cast(data[key])
                for key, cast in casts.items()
                if data.get(key) not in (None, "")
            }
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"Invalid GWRM setting: {exc}") from exc

        solver = data.get("solver")
        values["solver"] = (
            solver if isinstance(solver, SolverConfig) else SolverConfig.from_mapping(solver)
        )
        return cls(**values)


class IntervalMap:
    """
    Coefficient map ``phi`` of one interval, with its exact Jacobian.

    Sampling at the nodes, interpolating and integrating are linear, so the
    Jacobian is ``P diag(J_F(t_j, u_j)) E`` with ``E`` the node-evaluation
    matrix and ``P`` the interpolate-then-integrate projection.
    """

    def __init__(
        self, problem: OdeProblem, interval: Interval, order: int, u_start: FloatArray
    ) -> None:
        self.problem = problem
        self.interval = interval
        self.order = order
        # t0 is fixed by b, so only the nodes after it are collocated.
        self.nodes = lobatto_nodes(order, interval)[1:]

        evaluation, _ = chebyshev_matrices(order)
        self._evaluation = evaluation[1:]
        self._projection = collocation_matrix(order, interval.half_width)

        self.b = np.zeros((problem.dim, order + 1))
        self.b[:, 0] = 2.0 * np.asarray(u_start, dtype=float)

    @property
    def shape(self) -> tuple[int, int]:
        return self.b.shape

    def _coefficients(self, coeffs) -> FloatArray:
        array = np.asarray(coeffs, dtype=float)
        if array.size != self.b.size:
            raise ShapeError(
                f"Expected {self.b.size} coefficients for shape {self.shape}, got {array.size}."
            )
        return array.reshape(self.shape)

    def node_states(self, coeffs) -> FloatArray:
        return self._coefficients(coeffs) @ self._evaluation.T

    def rhs_at_nodes(self, coeffs) -> FloatArray:
        states = self.node_states(coeffs)
        values = np.column_stack(
            [self.problem.evaluate_rhs(t, states[:, j]) for j, t in enumerate(self.nodes)]
        )
        if not np.all(np.isfinite(values)):
            raise EvaluationError(
                f"{self.problem.name} rhs is non-finite on "
                f"[{self.interval.t0}, {self.interval.t1}]."
            )
        return values

    def __call__(self, coeffs) -> FloatArray:
        image = self.b + self.rhs_at_nodes(coeffs) @ self._projection.T
        return image.reshape(np.shape(coeffs))

    def jacobian(self, coeffs) -> FloatArray:
        states = self.node_states(coeffs)
        blocks = np.stack(
            [self.problem.jacobian_at(t, states[:, j]) for j, t in enumerate(self.nodes)]
        )
        if not np.all(np.isfinite(blocks)):
            raise EvaluationError("Problem Jacobian is non-finite at a collocation node.")
        size = self.b.size
        return np.einsum(
            "kj,jim,jl->ikml", self._projection, blocks, self._evaluation
        ).reshape(size, size)


def build_map(
    p: OdeProblem, iv: Interval, order: int, u_start=None
) -> tuple[IntervalMap, FloatArray]:
    """Return the fixed-point map of ``iv`` and its initial-condition coefficients ``b``."""

    start = p.u0 if u_start is None else np.asarray(u_start, dtype=float)
    if not np.all(np.isfinite(start)):
        raise EvaluationError(f"Initial state of [{iv.t0}, {iv.t1}] is non-finite.")
    phi = IntervalMap(p, iv, order, start)
    return phi, phi.b.copy()


def constant_guess(u_start, order: int) -> FloatArray:
    guess = np.zeros((np.size(u_start), order + 1))
    guess[:, 0] = 2.0 * np.asarray(u_start, dtype=float)
    return guess


def solve_interval(
    p: OdeProblem,
    iv: Interval,
    order: int,
    guess,
    cfg: Optional[GwrmConfig] = None,
    u_start=None,
) -> tuple[ChebSeries, SolveStats]:
    """
    Solve one interval and return the accepted piece.

    The returned coefficients are ``phi`` applied to the converged iterate,
    so the piece starts exactly (to rounding) at the interval's initial state.

    Raises:
        ConvergenceError: If the solver exhausts its iteration budget.
    """
    cfg = cfg or GwrmConfig(order=order)
    phi, _ = build_map(p, iv, order, u_start)

    initial = np.asarray(guess, dtype=float)
    if initial.shape != phi.shape:
        raise ShapeError(f"Initial guess has shape {initial.shape}, expected {phi.shape}.")

    jacobian = phi.jacobian if cfg.jacobian == "analytic" else None
    coeffs, stats = solve_fixed_point(phi, initial, cfg.solver, jacobian=jacobian)
    if not stats.converged:
        raise ConvergenceError(
            f"No convergence on [{iv.t0:.6g}, {iv.t1:.6g}] after {stats.iterations} "
            f"iterations (residual {stats.final_residual:.3e}).",
            stats=stats,
        )
    return ChebSeries(iv, phi(coeffs)), stats


def acceptance_ratios(piece: ChebSeries) -> FloatArray:
    """Tail ratios used for acceptance; identically zero variables count as resolved."""

    ratios = tail_ratio(piece)
    vanishing = ~np.any(piece.coeffs != 0.0, axis=1)
    ratios[vanishing] = 0.0
    return ratios


@dataclass(slots=True)
class GwrmSolution:
    """Accepted pieces of an adaptive run plus run statistics."""

    problem_name: str
    order: int
    epsilon: float
    t_target: float
    labels: tuple[str, ...] = ()
    pieces: list[ChebSeries] = field(default_factory=list)
    tail_ratios: list[FloatArray] = field(default_factory=list)
    total_iterations: int = 0
    jacobian_evals: int = 0
    resolve_count: int = 0
    status: str = "completed"
    message: str = ""

    @property
    def interval_count(self) -> int:
        return len(self.pieces)

    @property
    def total_modes(self) -> int:
        return sum(piece.order + 1 for piece in self.pieces)

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def start(self) -> float:
        return self.pieces[0].interval.t0

    @property
    def end(self) -> float:
        return self.pieces[-1].interval.t1

    @property
    def series(self) -> PiecewiseSeries:
        return PiecewiseSeries(tuple(self.pieces))

    def evaluate(self, t) -> FloatArray:
        return self.series.evaluate(t)

    def sample(self, times: Sequence[float]) -> FloatArray:
        return self.series.evaluate(np.asarray(times, dtype=float))

    def stats(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "message": self.message,
            "interval_count": self.interval_count,
            "total_iterations": self.total_iterations,
            "jacobian_evals": self.jacobian_evals,
            "resolve_count": self.resolve_count,
            "total_modes": self.total_modes,
            "t_reached": self.end if self.pieces else None,
            "t_target": self.t_target,
            "max_tail_ratio": max((float(np.max(r)) for r in self.tail_ratios), default=0.0),
        }

    def mode_economy(self, O_t: Optional[int] = None) -> dict[str, Any]:
        """Modes used by the run next to the extrema-based estimate."""

        from .diagnostics import mode_economy

        return mode_economy(self, O_t)

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem": self.problem_name,
            "labels": list(self.labels),
            "order": self.order,
            "epsilon": self.epsilon,
            "pieces": [piece.to_dict() for piece in self.pieces],
            "tail_ratios": [[float(value) for value in ratios] for ratios in self.tail_ratios],
            "stats": self.stats(),
        }


def _next_guess(
    previous: Optional[ChebSeries], iv: Interval, order: int, u_start: FloatArray, mode: str
) -> FloatArray:
    if mode == "extrapolate" and previous is not None:
        values = extrapolate(previous, lobatto_nodes(order, iv))
        if np.all(np.isfinite(values)):
            guess = fit(values, iv).coeffs.copy()
            # Keep the guess consistent with the exact initial state.
            guess[:, 0] += 2.0 * (u_start - evaluate(ChebSeries(iv, guess), iv.t0))
            return guess
    return constant_guess(u_start, order)


def solve_adaptive(p: OdeProblem, cfg: Optional[GwrmConfig] = None) -> GwrmSolution:
    """
    March over the problem span with adaptive interval lengths.

    A trial interval is accepted when its solve converges and every
    variable's tail ratio is at most ``epsilon``. Rejected intervals are
    shrunk by ``shrink`` and solved again; accepted intervals whose ratio is
    below ``grow_threshold * epsilon`` let the next interval grow by
    ``grow``, capped at ``max_dt``. A rejection at ``min_dt`` aborts the run
    and returns the accepted pieces with status ``partial``.
    """
    cfg = cfg or GwrmConfig()
    initial_dt, min_dt, max_dt = cfg.resolve_steps(p)
    t, t_end = p.span
    end_slack = 1e-12 * max(abs(t_end), p.duration)

    solution = GwrmSolution(
        problem_name=p.name,
        order=cfg.order,
        epsilon=cfg.epsilon,
        t_target=t_end,
        labels=p.labels,
    )
    u_start = p.u0.copy()
    previous: Optional[ChebSeries] = None
    dt = initial_dt

    while t_end - t > end_slack:
        if solution.interval_count >= cfg.max_intervals:
            solution.status = "partial"
            solution.message = f"Interval budget of {cfg.max_intervals} exhausted at t={t:.6g}."
            logger.warning(solution.message)
            break

        trial = min(dt, t_end - t)
        if t_end - (t + trial) < min_dt:
            trial = t_end - t
        t1 = t_end if trial == t_end - t else t + trial
        iv = Interval(t, t1)

        guess = _next_guess(previous, iv, cfg.order, u_start, cfg.initial_guess)
        try:
            piece, stats = solve_interval(p, iv, cfg.order, guess, cfg, u_start)
        except _RECOVERABLE as exc:
            stats = getattr(exc, "stats", None)
            ratios = None
            reason = str(exc)
        else:
            ratios = acceptance_ratios(piece)
            reason = f"tail ratio {float(np.max(ratios)):.3e} exceeds {cfg.epsilon:.3e}"

        if stats is not None:
            solution.total_iterations += stats.iterations
            solution.jacobian_evals += stats.jacobian_evals

        if ratios is None or float(np.max(ratios)) > cfg.epsilon:
            if trial <= min_dt * (1.0 + 1e-9):
                solution.status = "partial"
                solution.message = (
                    f"Interval starting at t={t:.6g} failed at the minimum length "
                    f"{min_dt:.3e}: {reason}"
                )
                logger.warning(solution.message)
                break
            dt = max(trial * cfg.shrink, min_dt)
            solution.resolve_count += 1
            logger.debug("Rejected [%.6g, %.6g]: %s", iv.t0, iv.t1, reason)
            continue

        solution.pieces.append(piece)
        solution.tail_ratios.append(ratios)
        u_start = evaluate(piece, t1)
        previous = piece
        t = t1

        worst = float(np.max(ratios))
        dt = min(trial * cfg.grow, max_dt) if worst < cfg.grow_threshold * cfg.epsilon else trial
        logger.debug("Accepted [%.6g, %.6g] with tail ratio %.3e", iv.t0, iv.t1, worst)

    logger.info(
        "%s: %d intervals, %d re-solves, %d iterations (%s)",
        p.name,
        solution.interval_count,
        solution.resolve_count,
        solution.total_iterations,
        solution.status,
    )
    return solution


__all__ = [
    "GwrmConfig",
    "GwrmSolution",
    "IntervalMap",
    "acceptance_ratios",
    "build_map",
    "constant_guess",
    "solve_adaptive",
    "solve_interval",
]
