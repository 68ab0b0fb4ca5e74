"""
Chebyshev series on a time interval and the spectral operators built on them.

Coefficients are stored in the halved-zeroth convention::

    f(tau) = a_0 / 2 + sum_{k=1..K} a_k T_k(tau),    tau = (t - center) / half_width

A series holds one row of coefficients per variable, so an N-dimensional
solution on one interval is a single ``ChebSeries`` with an ``N x (K+1)``
matrix. All operators return new series; instances never change after
construction.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .base import DomainError, EvaluationError, FloatArray, ShapeError

logger = logging.getLogger(__name__)

# Relative slack accepted when a time lands a rounding error outside an interval.
_ENDPOINT_SLACK = 1e-12


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed time interval ``[t0, t1]`` with ``t1 > t0``."""

    t0: float
    t1: float

    def __post_init__(self) -> None:
        t0 = float(self.t0)
        t1 = float(self.t1)
        if not (np.isfinite(t0) and np.isfinite(t1)):
            raise DomainError(f"Interval endpoints must be finite, got [{t0}, {t1}].")
        if t1 <= t0:
            raise DomainError(f"Interval end {t1} must exceed its start {t0}.")
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "t1", t1)

    @property
    def center(self) -> float:
        return 0.5 * (self.t1 + self.t0)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.t1 - self.t0)

    @property
    def length(self) -> float:
        return self.t1 - self.t0

    def slack(self) -> float:
        return _ENDPOINT_SLACK * max(abs(self.t0), abs(self.t1), self.length)


@dataclass(frozen=True, slots=True, eq=False)
class ChebSeries:
    """Truncated Chebyshev expansion of an N-dimensional function of time."""

    interval: Interval
    coeffs: FloatArray

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs[np.newaxis, :]
        if coeffs.ndim != 2 or coeffs.shape[0] < 1 or coeffs.shape[1] < 1:
            raise ShapeError(
                f"Coefficients must form a non-empty N x (K+1) matrix, got shape {coeffs.shape}."
            )
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("Chebyshev coefficients must be finite.")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def order(self) -> int:
        return self.coeffs.shape[1] - 1

    def __call__(self, t):
        return evaluate(self, t)

    def to_dict(self) -> dict[str, Any]:
        return {
            "t0": self.interval.t0,
            "t1": self.interval.t1,
            "dim": self.dim,
            "order": self.order,
            "coeffs": [float(value) for value in self.coeffs.ravel()],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ChebSeries":
        try:
            interval = Interval(payload["t0"], payload["t1"])
            dim = int(payload["dim"])
            order = int(payload["order"])
            flat = np.asarray(payload["coeffs"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ShapeError(f"Malformed series payload: {exc}") from exc

        if flat.size != dim * (order + 1):
            raise ShapeError(
                f"Series payload declares {dim} x {order + 1} coefficients but holds {flat.size}."
            )
        return cls(interval, flat.reshape(dim, order + 1))


def map_to_interval(t, iv: Interval):
    """
    Map time onto the reference variable ``tau`` in ``[-1, 1]``.

    Args:
        t: Scalar time or array of times inside ``iv``.
        iv (Interval): Interval defining the affine map.

    Returns:
        float or ndarray: ``(t - center) / half_width``, exactly ``-1`` and ``1`` at the endpoints.

    Raises:
        DomainError: If any time lies outside the interval.

    Examples:
        >>> map_to_interval(7.5, Interval(0.0, 10.0))
        0.5
    """
    times = np.asarray(t, dtype=float)
    slack = iv.slack()
    if np.any(~np.isfinite(times)) or np.any(times < iv.t0 - slack) or np.any(
        times > iv.t1 + slack
    ):
        raise DomainError(f"Time {t} lies outside [{iv.t0}, {iv.t1}].")

    tau = 2.0 * (times - iv.t0) / (iv.t1 - iv.t0) - 1.0
    # Endpoints map to -1 and +1 exactly.
    tau = np.where(times <= iv.t0, -1.0, np.where(times >= iv.t1, 1.0, tau))
    return float(tau) if tau.ndim == 0 else tau


def _clenshaw(coeffs: FloatArray, tau) -> FloatArray:
    tau = np.asarray(tau, dtype=float)
    scalar = tau.ndim == 0
    row = np.atleast_1d(tau)[np.newaxis, :]

    b1 = np.zeros((coeffs.shape[0], row.shape[1]))
    b2 = np.zeros_like(b1)
    two_tau = 2.0 * row
    for k in range(coeffs.shape[1] - 1, 0, -1):
        b1, b2 = two_tau * b1 - b2 + coeffs[:, k : k + 1], b1

    values = row * b1 - b2 + 0.5 * coeffs[:, :1]
    return values[:, 0] if scalar else values


def evaluate(series: ChebSeries, t) -> FloatArray:
    """
    Evaluate a series with Clenshaw's recurrence.

    A scalar ``t`` returns the state vector of length N; an array of M times
    returns an ``N x M`` matrix.
    """
    return _clenshaw(series.coeffs, map_to_interval(t, series.interval))


def extrapolate(series: ChebSeries, t) -> FloatArray:
    """Evaluate the polynomial continuation of a series, also outside its interval."""

    iv = series.interval
    tau = (2.0 * np.asarray(t, dtype=float) - iv.t0 - iv.t1) / (iv.t1 - iv.t0)
    return _clenshaw(series.coeffs, tau)


def _node_angles(order: int) -> FloatArray:
    # tau_j = cos(theta_j) runs from -1 to +1
    return np.pi * (order - np.arange(order + 1)) / order


def _reference_nodes(order: int) -> FloatArray:
    j = np.arange(order + 1)
    tau = np.sin(np.pi * (2 * j - order) / (2 * order))
    tau[0], tau[-1] = -1.0, 1.0
    return tau


def lobatto_nodes(order: int, iv: Interval) -> FloatArray:
    """Return the ``K+1`` Gauss-Lobatto collocation times of ``iv`` in ascending order."""

    if order < 1:
        raise DomainError(f"Collocation order must be at least 1, got {order}.")

    nodes = iv.center + iv.half_width * _reference_nodes(order)
    nodes[0] = iv.t0
    nodes[-1] = iv.t1
    return nodes


@lru_cache(maxsize=64)
def chebyshev_matrices(order: int) -> tuple[FloatArray, FloatArray]:
    """
    Return the node-evaluation and node-fit matrices for order ``K``.

    ``values = coeffs @ evaluation.T`` samples a series at the Lobatto nodes
    and ``coeffs = values @ fitting.T`` is the discrete Chebyshev transform
    back. Both are ``(K+1) x (K+1)`` and read-only.
    """
    if order < 1:
        raise DomainError(f"Collocation order must be at least 1, got {order}.")

    theta = _node_angles(order)
    cosines = np.cos(np.outer(theta, np.arange(order + 1)))

    evaluation = cosines.copy()
    evaluation[:, 0] *= 0.5

    weights = np.ones(order + 1)
    weights[0] = weights[-1] = 0.5
    fitting = (2.0 / order) * (cosines * weights[:, np.newaxis]).T
    fitting[order, :] *= 0.5

    evaluation.setflags(write=False)
    fitting.setflags(write=False)
    return evaluation, fitting


def fit(values, iv: Interval, order: Optional[int] = None) -> ChebSeries:
    """
    Build the series interpolating samples taken at ``lobatto_nodes``.

    Args:
        values: ``N x (K+1)`` samples (or ``K+1`` samples of a scalar function).
        iv (Interval): Interval the samples were taken on.
        order (int, optional): Expected order; checked against the sample count.

    Returns:
        ChebSeries: Series whose values at the nodes reproduce ``values``.

    Examples:
        >>> iv = Interval(-1.0, 1.0)
        >>> fit(lobatto_nodes(4, iv) ** 2, iv).coeffs[0].round(12).tolist()
        [1.0, 0.0, 0.5, 0.0, 0.0]
    """
    samples = np.asarray(values, dtype=float)
    if samples.ndim == 1:
        samples = samples[np.newaxis, :]
    if samples.ndim != 2:
        raise ShapeError(f"Samples must be a vector or an N x (K+1) matrix, got {samples.shape}.")

    count = samples.shape[1]
    if order is not None and count != order + 1:
        raise ShapeError(f"Expected {order + 1} samples for order {order}, got {count}.")
    if count < 2:
        raise ShapeError(f"At least two samples are required, got {count}.")
    if not np.all(np.isfinite(samples)):
        raise EvaluationError("Cannot fit non-finite samples.")

    _, fitting = chebyshev_matrices(count - 1)
    return ChebSeries(iv, samples @ fitting.T)


def _standard(coeffs: FloatArray) -> FloatArray:
    out = np.array(coeffs, dtype=float)
    out[..., 0] *= 0.5
    return out


def _halved(coeffs: FloatArray) -> FloatArray:
    out = np.array(coeffs, dtype=float)
    out[..., 0] *= 2.0
    return out


def _resized(coeffs: FloatArray, count: int) -> FloatArray:
    out = np.zeros(coeffs.shape[:-1] + (count,))
    keep = min(count, coeffs.shape[-1])
    out[..., :keep] = coeffs[..., :keep]
    return out


def integrate_from_start(series: ChebSeries) -> ChebSeries:
    """Return ``g(t) = integral of series from t0 to t`` as a series of order ``K+1``."""

    integral = cheb.chebint(
        _standard(series.coeffs), lbnd=-1, scl=series.interval.half_width, axis=1
    )
    return ChebSeries(series.interval, _halved(_resized(integral, series.order + 2)))


@lru_cache(maxsize=64)
def _unit_collocation_matrix(order: int) -> FloatArray:
    tau = _reference_nodes(order)[1:]
    vandermonde = cheb.chebvander(tau, order - 1)
    integral = cheb.chebint(np.eye(order), lbnd=-1, axis=0)
    integral[0] *= 2.0
    matrix = np.linalg.solve(vandermonde.T, integral.T).T
    matrix.setflags(write=False)
    return matrix


def collocation_matrix(order: int, half_width: float) -> FloatArray:
    """
    Map ``K`` samples of ``f`` to the coefficients of its integral from ``t0``.

    The samples sit at the Lobatto nodes after ``t0``. They are interpolated
    by a polynomial of degree ``K-1`` whose exact integral has order ``K``, so
    nothing is truncated. The result is ``(K+1) x K`` and vanishes at ``t0``.
    """
    if order < 1:
        raise DomainError(f"Collocation order must be at least 1, got {order}.")
    return half_width * _unit_collocation_matrix(order)


def differentiate(series: ChebSeries) -> ChebSeries:
    """Return ``d/dt`` of the series as a series of order ``K-1``."""

    derivative = cheb.chebder(
        _standard(series.coeffs), scl=1.0 / series.interval.half_width, axis=1
    )
    return ChebSeries(series.interval, _halved(_resized(derivative, max(series.order, 1))))


def multiply(a: ChebSeries, b: ChebSeries, order: int) -> ChebSeries:
    """
    Multiply two series and keep the modes up to ``order``.

    Series of dimension 1 broadcast against series of any dimension.
    """
    if a.interval != b.interval:
        raise DomainError("Cannot multiply series defined on different intervals.")
    if a.dim != b.dim and 1 not in (a.dim, b.dim):
        raise ShapeError(f"Cannot multiply series of dimension {a.dim} and {b.dim}.")
    if order < 0:
        raise DomainError(f"Target order must be non-negative, got {order}.")

    dim = max(a.dim, b.dim)
    left = np.broadcast_to(_standard(a.coeffs), (dim, a.order + 1))
    right = np.broadcast_to(_standard(b.coeffs), (dim, b.order + 1))
    product = np.vstack(
        [_resized(cheb.chebmul(row_a, row_b), order + 1) for row_a, row_b in zip(left, right)]
    )
    return ChebSeries(a.interval, _halved(product))


def tail_ratio(series: ChebSeries) -> FloatArray:
    """
    Per-variable ratio ``(|a_{K-1}| + |a_K|) / (|a_0| + |a_1|)``.

    Variables whose leading coefficients both vanish report ``inf``.

    Examples:
        >>> tail_ratio(ChebSeries(Interval(-1, 1), [2.0, 1.0, 0.01, 0.001])).round(6).tolist()
        [0.003667]
    """
    order = series.order
    if order < 2:
        raise ShapeError(f"Tail ratio needs order K >= 2, got {order}.")

    magnitudes = np.abs(series.coeffs)
    tail = magnitudes[:, order - 1] + magnitudes[:, order]
    head = magnitudes[:, 0] + magnitudes[:, 1]
    return np.divide(tail, head, out=np.full_like(tail, np.inf), where=head > 0)


@dataclass(frozen=True, slots=True, eq=False)
class PiecewiseSeries:
    """Contiguous sequence of series sharing a dimension."""

    pieces: tuple[ChebSeries, ...]

    def __post_init__(self) -> None:
        pieces = tuple(self.pieces)
        if not pieces:
            raise ShapeError("A piecewise series needs at least one piece.")
        dims = {piece.dim for piece in pieces}
        if len(dims) != 1:
            raise ShapeError(f"Pieces disagree on dimension: {sorted(dims)}.")
        for left, right in zip(pieces, pieces[1:]):
            if left.interval.t1 != right.interval.t0:
                raise DomainError(
                    f"Pieces are not contiguous at {left.interval.t1} / {right.interval.t0}."
                )
        object.__setattr__(self, "pieces", pieces)

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    @property
    def start(self) -> float:
        return self.pieces[0].interval.t0

    @property
    def end(self) -> float:
        return self.pieces[-1].interval.t1

    @property
    def breakpoints(self) -> FloatArray:
        return np.array([piece.interval.t0 for piece in self.pieces] + [self.end])

    def __len__(self) -> int:
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t) -> FloatArray:
        times = np.asarray(t, dtype=float)
        starts = self.breakpoints[:-1]
        if times.ndim == 0:
            index = _piece_index(starts, float(times))
            return evaluate(self.pieces[index], float(times))

        flat = times.ravel()
        indices = np.clip(np.searchsorted(starts, flat, side="right") - 1, 0, len(self) - 1)
        values = np.empty((self.dim, flat.size))
        for index in np.unique(indices):
            mask = indices == index
            values[:, mask] = evaluate(self.pieces[index], flat[mask])
        return values

    def component(self, rows: Sequence[int]) -> "PiecewiseSeries":
        """Restrict every piece to the given variable rows."""

        rows = list(rows)
        return PiecewiseSeries(
            tuple(ChebSeries(piece.interval, piece.coeffs[rows]) for piece in self.pieces)
        )

    def map_pieces(self, func) -> "PiecewiseSeries":
        return PiecewiseSeries(tuple(func(piece) for piece in self.pieces))


def _piece_index(starts: FloatArray, t: float) -> int:
    index = int(np.searchsorted(starts, t, side="right")) - 1
    return min(max(index, 0), len(starts) - 1)


def series_to_json(series: ChebSeries | Iterable[ChebSeries], **kwargs: Any) -> str:
    """Serialize one series or a list of pieces; floats round-trip exactly."""

    if isinstance(series, ChebSeries):
        return json.dumps(series.to_dict(), **kwargs)
    return json.dumps([piece.to_dict() for piece in series], **kwargs)


def series_from_json(text: str) -> ChebSeries | list[ChebSeries]:
    payload = json.loads(text)
    if isinstance(payload, list):
        return [ChebSeries.from_dict(entry) for entry in payload]
    return ChebSeries.from_dict(payload)


__all__ = [
    "ChebSeries",
    "Interval",
    "PiecewiseSeries",
    "chebyshev_matrices",
    "collocation_matrix",
    "differentiate",
    "evaluate",
    "extrapolate",
    "fit",
    "integrate_from_start",
    "lobatto_nodes",
    "map_to_interval",
    "multiply",
    "series_from_json",
    "series_to_json",
    "tail_ratio",
]
