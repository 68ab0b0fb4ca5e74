"""
Local Lyapunov exponents, stiff/chaotic classification and mode-count estimators.

Exponents are the eigenvalues of the Jacobian frozen at one point of the
trajectory. For the small systems handled here they are computed from the
characteristic polynomial and polished with Newton's method, which keeps the
conjugate structure of real matrices exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .base import ConfigurationError, DomainError, FloatArray, ShapeError, UnsupportedAccuracyError
from .chebyshev import Interval, evaluate, fit, lobatto_nodes
from .constants import (
    CHAOS_THRESHOLD,
    EXTREMA_SAMPLES_PER_INTERVAL,
    MODE_ESTIMATORS,
    SPREAD_FACTOR,
    STIFF_THRESHOLD,
)
from .gwrm import GwrmSolution
from .problems import OdeProblem, Trajectory

logger = logging.getLogger(__name__)

MAX_DIMENSION = 4

CLASSIFICATIONS = ("stiff", "chaotic", "both", "neutral")


@dataclass(slots=True)
class ClassifyThresholds:
    """Thresholds separating stiff, chaotic and neutral exponent sets."""

    chaos: float = CHAOS_THRESHOLD
    stiff: float = STIFF_THRESHOLD
    spread: float = SPREAD_FACTOR

    def __post_init__(self) -> None:
        if not (self.chaos > 0 and self.stiff > 0 and self.spread > 0):
            raise ConfigurationError(
                f"Thresholds must be positive, got chaos={self.chaos}, "
                f"stiff={self.stiff}, spread={self.spread}."
            )

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, payload: Optional[Mapping[str, Any]]) -> "ClassifyThresholds":
        if not payload:
            return cls()
        try:
            values = {
                key: float(payload[key])
                for key in ("chaos", "stiff", "spread")
                if payload.get(key) not in (None, "")
            }
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"Invalid classification threshold: {exc}") from exc
        return cls(**values)


def _complex_pairs(values) -> list[list[float]]:
    return [[float(np.real(value)), float(np.imag(value))] for value in values]


@dataclass(slots=True, eq=False)
class LleReport:
    """Frozen-Jacobian exponents at one point of a trajectory."""

    t: float
    state: FloatArray
    jacobian: FloatArray
    eigenvalues: np.ndarray
    classification: str
    gamma_dt: list[float] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "state": [float(value) for value in self.state],
            "jacobian": [[float(value) for value in row] for row in self.jacobian],
            "eigenvalues": _complex_pairs(self.eigenvalues),
            "classification": self.classification,
            "gamma_dt": list(self.gamma_dt),
        }


@dataclass(frozen=True, slots=True)
class ModeEstimate:
    """Predicted number of Chebyshev modes for ``N_e`` extrema at accuracy ``epsilon``."""

    N_e: float
    epsilon: float
    O_t: int
    K_a: int

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


def characteristic_polynomial(matrix) -> FloatArray:
    """Monic characteristic polynomial, highest power first, via Faddeev-LeVerrier."""

    J = np.asarray(matrix, dtype=float)
    n = J.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(J)
    identity = np.eye(n)
    for k in range(1, n + 1):
        M = J @ M + coeffs[k - 1] * identity
        coeffs[k] = -np.trace(J @ M) / k
    return coeffs


def _polish(coeffs: FloatArray, root: complex, steps: int = 4) -> complex:
    derivative = np.polyder(coeffs)
    best = root
    best_value = abs(np.polyval(coeffs, root))
    for _ in range(steps):
        slope = np.polyval(derivative, best)
        if slope == 0:
            break
        candidate = best - np.polyval(coeffs, best) / slope
        value = abs(np.polyval(coeffs, candidate))
        if not value < best_value:
            break
        best, best_value = candidate, value
    return best


def _sorted_eigenvalues(values) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((-values.imag, -values.real))
    return values[order]


def eigenvalues_small(matrix) -> np.ndarray:
    """
    Eigenvalues of a real ``N x N`` matrix with ``N <= 4``.

    Roots of the characteristic polynomial are seeded by ``numpy.roots`` and
    refined with Newton's method; complex roots are returned as exact
    conjugate pairs. The result is sorted by descending real part.

    Raises:
        ShapeError: If the matrix is not square.
        DomainError: If it has non-finite entries or ``N > 4``.

    Examples:
        >>> eigenvalues_small([[0.0, -1.0], [1.0, 0.0]]).round(12).tolist()
        [1j, -1j]
    """
    J = np.atleast_2d(np.asarray(matrix, dtype=float))
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ShapeError(f"Expected a square matrix, got shape {J.shape}.")
    if not np.all(np.isfinite(J)):
        raise DomainError("Jacobian contains non-finite entries.")
    n = J.shape[0]
    if n > MAX_DIMENSION:
        raise DomainError(f"Eigenvalues are supported for N <= {MAX_DIMENSION}, got N = {n}.")
    if n == 1:
        return np.array([complex(J[0, 0])])

    coeffs = characteristic_polynomial(J)
    seeds = np.roots(coeffs)
    # np.roots drops trailing zero coefficients and returns exact zeros for them
    scale = max(1.0, float(np.max(np.abs(seeds))) if seeds.size else 1.0)

    roots: list[complex] = []
    for seed in seeds:
        if abs(seed.imag) <= 1e-12 * scale:
            roots.append(complex(_polish(coeffs, float(seed.real)), 0.0))
        elif seed.imag > 0:
            polished = complex(_polish(coeffs, complex(seed)))
            roots.extend([polished, polished.conjugate()])

    if len(roots) != n:
        logger.debug("Conjugate pairing failed; keeping unpolished roots")
        roots = list(seeds)
    return _sorted_eigenvalues(roots)


def classify(
    eigs,
    thresholds: Optional[ClassifyThresholds] = None,
    *,
    stiff_threshold: Optional[float] = None,
    chaos_threshold: Optional[float] = None,
    spread: Optional[float] = None,
) -> str:
    """
    Label an exponent set as ``stiff``, ``chaotic``, ``both`` or ``neutral``.

    Chaotic when some real part exceeds ``thresholds.chaos``. Stiff when the
    most negative real part lies below ``-thresholds.stiff`` and exceeds the
    slowest other nonzero mode (or ``thresholds.chaos`` when there is none)
    by more than ``thresholds.spread`` in magnitude.

    The keyword thresholds override the matching fields of ``thresholds``.

    Examples:
        >>> classify([-5000.0, -0.5])
        'stiff'
        >>> classify([-5000.0, -0.5], stiff_threshold=1e4)
        'neutral'
    """
    overrides = {
        key: value
        for key, value in (
            ("stiff", stiff_threshold),
            ("chaos", chaos_threshold),
            ("spread", spread),
        )
        if value is not None
    }
    thresholds = replace(thresholds or ClassifyThresholds(), **overrides)
    real = np.real(np.asarray(eigs, dtype=complex)).ravel()
    if real.size == 0:
        return "neutral"

    chaotic = bool(np.any(real > thresholds.chaos))

    fastest = int(np.argmin(real))
    most_negative = real[fastest]
    others = np.abs(np.delete(real, fastest))
    nonzero = others[others > thresholds.chaos]
    slowest = float(np.min(nonzero)) if nonzero.size else 0.0
    stiff = bool(
        most_negative < -thresholds.stiff
        and abs(most_negative) / max(slowest, thresholds.chaos) > thresholds.spread
    )

    if stiff and chaotic:
        return "both"
    if stiff:
        return "stiff"
    if chaotic:
        return "chaotic"
    return "neutral"


def lle(
    p: OdeProblem,
    t: float,
    state,
    dt: Optional[float] = None,
    thresholds: Optional[ClassifyThresholds] = None,
) -> LleReport:
    """Frozen-Jacobian exponents of ``p`` at ``(t, state)``; ``dt`` fills ``gamma_dt``."""

    point = np.asarray(state, dtype=float).reshape(-1)
    if point.size != p.dim:
        raise ShapeError(f"{p.name} expects a state of length {p.dim}, got {point.size}.")

    jacobian = p.jacobian_at(float(t), point)
    eigs = eigenvalues_small(jacobian)
    return LleReport(
        t=float(t),
        state=point,
        jacobian=jacobian,
        eigenvalues=eigs,
        classification=classify(eigs, thresholds),
        gamma_dt=[] if dt is None else [float(abs(value.real) * dt) for value in eigs],
    )


def lle_along(
    p: OdeProblem,
    times: Sequence[float],
    states,
    dt: Optional[float] = None,
    thresholds: Optional[ClassifyThresholds] = None,
) -> list[LleReport]:
    """Exponent reports at every ``(times[i], states[i])`` of a sampled trajectory."""

    points = np.atleast_2d(np.asarray(states, dtype=float))
    if points.shape[0] != len(times):
        raise ShapeError(f"Got {len(times)} times but {points.shape[0]} states.")
    return [lle(p, t, point, dt, thresholds) for t, point in zip(times, points)]


def count_extrema(samples) -> int:
    """
    Count local extrema as sign changes between successive differences.

    Differences smaller than ``1e-12`` times the sample range count as
    plateaus and are skipped.

    Raises:
        DomainError: If fewer than three samples are given.
    """
    values = np.asarray(samples, dtype=float).ravel()
    if values.size < 3:
        raise DomainError(f"At least 3 samples are needed to count extrema, got {values.size}.")

    steps = np.diff(values)
    tolerance = 1e-12 * float(np.ptp(values))
    signs = np.sign(steps)
    signs[np.abs(steps) <= tolerance] = 0.0
    signs = signs[signs != 0.0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _dense_solution_samples(solution: GwrmSolution, per_interval: int) -> FloatArray:
    chunks = []
    last = len(solution.pieces) - 1
    for index, piece in enumerate(solution.pieces):
        grid = np.linspace(
            piece.interval.t0, piece.interval.t1, per_interval, endpoint=index == last
        )
        chunks.append(evaluate(piece, grid))
    return np.concatenate(chunks, axis=1)


def count_solution_extrema(
    source: Union[GwrmSolution, Trajectory],
    samples_per_interval: int = EXTREMA_SAMPLES_PER_INTERVAL,
    labels: Optional[Sequence[str]] = None,
) -> dict[str, int]:
    """Extrema per variable of a GWRM run (sampled per interval) or of a trajectory."""

    if isinstance(source, GwrmSolution):
        values = _dense_solution_samples(source, samples_per_interval)
        names = labels or source.labels
    else:
        values = source.states.T
        names = labels
    names = tuple(names) if names else tuple(f"u{i}" for i in range(values.shape[0]))
    return {name: count_extrema(row) for name, row in zip(names, values)}


def _calibrated(epsilon: float) -> tuple[float, float]:
    for key, coefficients in MODE_ESTIMATORS.items():
        if math.isclose(epsilon, key, rel_tol=1e-9):
            return coefficients
    raise UnsupportedAccuracyError(
        f"No mode estimator calibrated for epsilon={epsilon}; "
        f"available: {', '.join(str(key) for key in MODE_ESTIMATORS)}."
    )


def estimate_modes(N_e: float, epsilon: float, O_t: int = 0) -> ModeEstimate:
    """
    Chebyshev modes needed to resolve ``N_e`` extrema, ``K_a = ceil(slope * N_e + c + O_t)``.

    Examples:
        >>> estimate_modes(2, 0.001).K_a
        8
    """
    if N_e < 0:
        raise DomainError(f"Extrema count must be non-negative, got {N_e}.")
    slope, intercept = _calibrated(epsilon)
    # Exact integers (e.g. 5.0) must not round up through representation error.
    K_a = math.ceil(slope * N_e + intercept + O_t - 1e-9)
    return ModeEstimate(N_e=N_e, epsilon=epsilon, O_t=O_t, K_a=K_a)


def mode_economy(solution: GwrmSolution, O_t: Optional[int] = None) -> dict[str, Any]:
    """
    Compare the modes a run used with the extrema-based estimate.

    The estimate takes the busiest variable's extrema per interval and adds
    the temporal order ``O_t`` (defaults to the system dimension).
    """
    if not solution.pieces:
        raise DomainError("Cannot assess an empty solution.")

    extrema = count_solution_extrema(solution)
    per_interval = max(extrema.values()) / solution.interval_count
    order = solution.pieces[0].dim if O_t is None else O_t
    try:
        estimate = estimate_modes(per_interval, solution.epsilon, order)
    except UnsupportedAccuracyError:
        estimate = None

    return {
        "interval_count": solution.interval_count,
        "total_modes": solution.total_modes,
        "extrema": extrema,
        "extrema_per_interval": per_interval,
        "estimated_modes_per_interval": estimate.K_a if estimate else None,
        "estimated_total_modes": estimate.K_a * solution.interval_count if estimate else None,
    }


@dataclass(slots=True)
class CalibrationBucket:
    count: int
    mean_K: float
    predicted_K: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(slots=True)
class CalibrationResult:
    """Empirical minimal orders of random oscillating signals grouped by extrema count."""

    epsilon: float
    seed: int
    samples: list[tuple[int, int]] = field(default_factory=list)
    buckets: dict[int, CalibrationBucket] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "seed": self.seed,
            "n_signals": len(self.samples),
            "buckets": {str(key): bucket.as_dict() for key, bucket in sorted(self.buckets.items())},
        }


_REFERENCE_GRID = np.linspace(-1.0, 1.0, 2001)


def _random_signal(rng: np.random.Generator, target: int) -> Callable[[FloatArray], FloatArray]:
    terms = int(rng.integers(2, 7))
    top = (target + 1) * np.pi / 2.0
    frequencies = rng.uniform(0.2, top, size=terms)
    amplitudes = rng.uniform(0.2, 1.0, size=terms)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=terms)

    def signal(tau: FloatArray) -> FloatArray:
        tau = np.asarray(tau, dtype=float)
        return np.sum(
            amplitudes[:, np.newaxis] * np.sin(np.outer(frequencies, tau) + phases[:, np.newaxis]),
            axis=0,
        )

    return signal


def minimal_order(
    signal: Callable[[FloatArray], FloatArray], epsilon: float, max_order: int = 60
) -> int:
    """Smallest ``K`` whose Lobatto interpolant has max error ``<= epsilon * max|signal|``."""

    reference = signal(_REFERENCE_GRID)
    scale = float(np.max(np.abs(reference)))
    unit = Interval(-1.0, 1.0)
    for order in range(2, max_order + 1):
        approximation = evaluate(fit(signal(lobatto_nodes(order, unit)), unit), _REFERENCE_GRID)[0]
        if np.max(np.abs(approximation - reference)) <= epsilon * scale:
            return order
    raise DomainError(f"Signal not resolved to {epsilon} with K <= {max_order}.")


def calibrate_modes(
    n_signals: int = 100,
    epsilon: float = 0.01,
    seed: int = 0,
    max_attempts: int = 1000,
) -> CalibrationResult:
    """
    Measure the minimal order of random aperiodic signals with 1 to 6 extrema.

    Each signal is a sum of 2 to 6 sinusoids with random amplitudes, phases
    and frequencies on ``[-1, 1]``; target extrema counts cycle through 1..6
    and candidates are redrawn until they hit the target.
    """
    if n_signals < 1:
        raise ConfigurationError(f"n_signals must be at least 1, got {n_signals}.")

    rng = np.random.default_rng(seed)
    result = CalibrationResult(epsilon=epsilon, seed=seed)
    for index in range(n_signals):
        target = 1 + index % 6
        for _ in range(max_attempts):
            signal = _random_signal(rng, target)
            if count_extrema(signal(_REFERENCE_GRID)) == target:
                break
        else:
            raise DomainError(f"No signal with {target} extrema after {max_attempts} draws.")
        result.samples.append((target, minimal_order(signal, epsilon)))

    slope, intercept = MODE_ESTIMATORS.get(epsilon, (math.nan, math.nan))
    for extrema in sorted({n for n, _ in result.samples}):
        orders = [K for n, K in result.samples if n == extrema]
        result.buckets[extrema] = CalibrationBucket(
            count=len(orders),
            mean_K=float(np.mean(orders)),
            predicted_K=slope * extrema + intercept,
        )
    logger.info("Calibrated %d signals at epsilon=%g", n_signals, epsilon)
    return result


__all__ = [
    "CalibrationBucket",
    "CalibrationResult",
    "ClassifyThresholds",
    "LleReport",
    "ModeEstimate",
    "calibrate_modes",
    "characteristic_polynomial",
    "classify",
    "count_extrema",
    "count_solution_extrema",
    "eigenvalues_small",
    "estimate_modes",
    "lle",
    "lle_along",
    "minimal_order",
    "mode_economy",
]
