import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from gwrm_kit.base import DomainError, EvaluationError, ShapeError
from gwrm_kit.chebyshev import (
    ChebSeries,
    Interval,
    PiecewiseSeries,
    chebyshev_matrices,
    collocation_matrix,
    differentiate,
    evaluate,
    extrapolate,
    fit,
    integrate_from_start,
    lobatto_nodes,
    map_to_interval,
    multiply,
    series_from_json,
    series_to_json,
    tail_ratio,
)


@pytest.mark.parametrize(
    "t0, t1",
    [(1.0, 1.0), (2.0, 1.0), (0.0, math.nan), (-math.inf, 0.0)],
)
def test_interval_rejects_empty_or_infinite_bounds(t0, t1):
    with pytest.raises(DomainError):
        Interval(t0, t1)


def test_map_to_interval_hits_endpoints_exactly():
    iv = Interval(0.1, 0.7)
    assert map_to_interval(0.1, iv) == -1.0
    assert map_to_interval(0.7, iv) == 1.0
    assert_array_equal(map_to_interval(np.array([0.1, 0.7]), iv), [-1.0, 1.0])
    assert map_to_interval(7.5, Interval(0.0, 10.0)) == 0.5


def test_map_to_interval_outside_raises():
    with pytest.raises(DomainError):
        map_to_interval(10.5, Interval(0.0, 10.0))
    with pytest.raises(DomainError):
        map_to_interval(np.array([0.0, -1.0]), Interval(0.0, 10.0))


def test_lobatto_nodes_are_ascending_with_exact_endpoints(unit_interval):
    nodes = lobatto_nodes(4, unit_interval)
    half = math.sqrt(2.0) / 2.0
    assert_allclose(nodes, [-1.0, -half, 0.0, half, 1.0], atol=1e-15)

    nodes = lobatto_nodes(7, Interval(0.3, 1.9))
    assert nodes[0] == 0.3
    assert nodes[-1] == 1.9
    assert np.all(np.diff(nodes) > 0)


def test_chebyshev_matrices_are_inverse_and_read_only():
    evaluation, fitting = chebyshev_matrices(9)
    assert_allclose(evaluation @ fitting, np.eye(10), atol=1e-13)
    with pytest.raises(ValueError):
        evaluation[0, 0] = 1.0


def test_fit_recovers_x_squared(unit_interval):
    series = fit(lobatto_nodes(4, unit_interval) ** 2, unit_interval)
    assert_allclose(series.coeffs[0], [1.0, 0.0, 0.5, 0.0, 0.0], atol=1e-14)


def test_fit_reproduces_samples_at_the_nodes():
    iv = Interval(2.0, 5.0)
    nodes = lobatto_nodes(10, iv)
    samples = np.vstack([np.sin(nodes), np.exp(-nodes)])
    series = fit(samples, iv, order=10)

    assert series.dim == 2
    assert series.order == 10
    assert_allclose(evaluate(series, nodes), samples, rtol=1e-13, atol=1e-14)


def test_fit_rejects_bad_samples(unit_interval):
    with pytest.raises(ShapeError):
        fit(np.ones(5), unit_interval, order=6)
    with pytest.raises(EvaluationError):
        fit([1.0, np.nan, 2.0], unit_interval)


@pytest.mark.parametrize("k", [0, 1, 2, 5, 9])
def test_evaluate_single_mode_matches_cosine_definition(k):
    coeffs = np.zeros(10)
    coeffs[k] = 1.0
    series = ChebSeries(Interval(-1.0, 1.0), coeffs)
    tau = np.linspace(-1.0, 1.0, 37)

    expected = np.cos(k * np.arccos(tau))
    if k == 0:
        expected = 0.5 * expected
    assert_allclose(evaluate(series, tau)[0], expected, atol=1e-13)


def test_evaluate_scalar_returns_state_vector():
    series = ChebSeries(Interval(0.0, 1.0), [[2.0, 1.0], [4.0, 0.0]])
    assert_allclose(series(1.0), [2.0, 2.0])
    assert evaluate(series, np.array([0.0, 1.0])).shape == (2, 2)


def test_extrapolate_continues_polynomial_outside_interval():
    iv = Interval(0.0, 1.0)
    series = fit(lobatto_nodes(3, iv) ** 3, iv)
    assert_allclose(extrapolate(series, 1.5), [3.375], rtol=1e-12)
    with pytest.raises(DomainError):
        evaluate(series, 1.5)


def test_integrate_from_start_vanishes_at_start_and_matches_exp():
    iv = Interval(0.0, 1.0)
    series = fit(np.exp(lobatto_nodes(16, iv)), iv)
    integral = integrate_from_start(series)

    assert integral.order == 17
    assert abs(integral(0.0)[0]) <= 1e-15
    assert_allclose(integral(1.0), [math.e - 1.0], rtol=1e-12)


def test_differentiate_inverts_integration(rng):
    series = ChebSeries(Interval(0.0, 2.0), rng.normal(size=(2, 7)))
    recovered = differentiate(integrate_from_start(series))
    assert_allclose(recovered.coeffs, series.coeffs, rtol=1e-12, atol=1e-12)


def test_differentiate_polynomial():
    iv = Interval(-1.0, 3.0)
    nodes = lobatto_nodes(4, iv)
    derivative = differentiate(fit(nodes**2 - 3.0 * nodes, iv))
    t = np.linspace(-1.0, 3.0, 9)
    assert_allclose(derivative(t)[0], 2.0 * t - 3.0, atol=1e-12)


def test_differentiate_constant_is_zero():
    derivative = differentiate(ChebSeries(Interval(0.0, 1.0), [[3.0]]))
    assert_array_equal(derivative.coeffs, [[0.0]])


def test_collocation_matrix_integrates_low_degree_polynomials_exactly():
    iv = Interval(1.0, 1.5)
    nodes = lobatto_nodes(5, iv)
    samples = np.vstack([1.0 + nodes - 2.0 * nodes**4, np.full(6, 3.0)])
    matrix = collocation_matrix(5, iv.half_width)
    collocated = ChebSeries(iv, samples[:, 1:] @ matrix.T)
    full = integrate_from_start(fit(samples, iv))

    assert matrix.shape == (6, 5)
    assert_allclose(collocated(1.0), [0.0, 0.0], atol=1e-14)
    assert_allclose(collocated.coeffs, full.coeffs[:, :6], rtol=1e-11, atol=1e-12)
    assert_allclose(full.coeffs[:, 6], 0.0, atol=1e-12)


def test_integrate_from_start_of_zero_series():
    integral = integrate_from_start(ChebSeries(Interval(0.0, 1.0), [[0.0], [0.0]]))
    assert integral.order == 1
    assert_array_equal(integral.coeffs, np.zeros((2, 2)))


def test_multiply_matches_pointwise_product(rng):
    iv = Interval(0.0, 1.0)
    a = ChebSeries(iv, rng.normal(size=(2, 4)))
    b = ChebSeries(iv, rng.normal(size=(2, 5)))
    product = multiply(a, b, a.order + b.order)
    t = rng.uniform(0.0, 1.0, size=25)
    assert_allclose(product(t), a(t) * b(t), rtol=1e-12, atol=1e-12)


def test_multiply_broadcasts_scalar_series():
    iv = Interval(0.0, 1.0)
    scalar = ChebSeries(iv, [4.0])
    vector = ChebSeries(iv, [[2.0, 1.0], [0.0, 3.0]])
    assert_allclose(multiply(scalar, vector, 1).coeffs, 2.0 * vector.coeffs)


def test_multiply_rejects_mismatched_intervals():
    with pytest.raises(DomainError):
        multiply(
            ChebSeries(Interval(0.0, 1.0), [1.0, 1.0]),
            ChebSeries(Interval(0.0, 2.0), [1.0, 1.0]),
            2,
        )


def test_tail_ratio_example():
    series = ChebSeries(Interval(-1.0, 1.0), [2.0, 1.0, 0.01, 0.001])
    assert_allclose(tail_ratio(series), [0.011 / 3.0])


@pytest.mark.edge_case
def test_tail_ratio_edge_cases():
    assert tail_ratio(ChebSeries(Interval(0.0, 1.0), [0.0, 0.0, 1.0]))[0] == math.inf
    with pytest.raises(ShapeError):
        tail_ratio(ChebSeries(Interval(0.0, 1.0), [1.0, 1.0]))


def test_smooth_function_has_geometric_tail():
    iv = Interval(0.0, 1.0)
    series = fit(np.exp(lobatto_nodes(12, iv)), iv)
    magnitudes = np.abs(series.coeffs[0, :10])
    assert np.all(np.diff(magnitudes) < 0)
    assert tail_ratio(series)[0] < 1e-10


def test_series_is_immutable():
    series = ChebSeries(Interval(0.0, 1.0), [1.0, 2.0])
    with pytest.raises(ValueError):
        series.coeffs[0, 0] = 5.0


def test_series_rejects_non_finite_coefficients():
    with pytest.raises(DomainError):
        ChebSeries(Interval(0.0, 1.0), [1.0, math.inf])


def test_piecewise_evaluation_uses_right_piece_at_breakpoints():
    left = ChebSeries(Interval(0.0, 1.0), [[2.0]])
    right = ChebSeries(Interval(1.0, 2.0), [[6.0]])
    piecewise = PiecewiseSeries((left, right))

    assert piecewise.start == 0.0
    assert piecewise.end == 2.0
    assert_array_equal(piecewise.breakpoints, [0.0, 1.0, 2.0])
    assert_allclose(piecewise.evaluate(1.0), [3.0])
    assert_allclose(piecewise.evaluate(np.array([0.5, 1.0, 1.5, 2.0]))[0], [1.0, 3.0, 3.0, 3.0])


def test_piecewise_rejects_gaps_and_mixed_dimensions():
    with pytest.raises(DomainError):
        PiecewiseSeries(
            (ChebSeries(Interval(0.0, 1.0), [1.0]), ChebSeries(Interval(1.5, 2.0), [1.0]))
        )
    with pytest.raises(ShapeError):
        PiecewiseSeries(
            (
                ChebSeries(Interval(0.0, 1.0), [1.0]),
                ChebSeries(Interval(1.0, 2.0), [[1.0], [2.0]]),
            )
        )


def test_piecewise_component_selects_rows():
    piece = ChebSeries(Interval(0.0, 1.0), [[2.0, 0.0], [4.0, 1.0]])
    component = PiecewiseSeries((piece,)).component([1])
    assert component.dim == 1
    assert_allclose(component.evaluate(1.0), [3.0])


def test_series_json_preserves_coefficients_exactly(rng):
    pieces = [
        ChebSeries(Interval(0.0, 0.1), rng.normal(size=(3, 9))),
        ChebSeries(Interval(0.1, 0.3), rng.normal(size=(3, 9))),
    ]
    restored = series_from_json(series_to_json(pieces))

    for original, copy in zip(pieces, restored):
        assert copy.interval == original.interval
        assert_array_equal(copy.coeffs, original.coeffs)

    single = series_from_json(series_to_json(pieces[0]))
    assert_array_equal(single.coeffs, pieces[0].coeffs)


def test_from_dict_rejects_inconsistent_payload():
    payload = ChebSeries(Interval(0.0, 1.0), [1.0, 2.0, 3.0]).to_dict()
    payload["order"] = 5
    with pytest.raises(ShapeError):
        ChebSeries.from_dict(payload)


@pytest.mark.performance
def test_clenshaw_evaluation_speed(benchmark, rng):
    series = ChebSeries(Interval(0.0, 1.0), rng.normal(size=(3, 17)))
    grid = np.linspace(0.0, 1.0, 10_000)
    values = benchmark(evaluate, series, grid)
    assert values.shape == (3, 10_000)
