import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from gwrm_kit.base import DomainError, ShapeError
from gwrm_kit.chebyshev import ChebSeries, Interval, fit, lobatto_nodes
from gwrm_kit.gwrm import GwrmConfig, solve_adaptive
from gwrm_kit.problems import Trajectory, central_difference_jacobian, linear_test
from gwrm_kit.smoothing import (
    auto_ti_offset,
    recover_from_ta,
    recover_from_ti,
    running_average_oracle,
    smoothing_ledger,
    steepness,
    total_coefficients,
    transform_lta,
    transform_ta,
    transform_ti,
)

ACCURATE = GwrmConfig(order=12, epsilon=1e-8)


def test_steepness_of_straight_line_samples():
    times = np.linspace(0.0, 1.0, 101)
    report = steepness((times, 3.0 * times + 1.0))
    assert report.S == pytest.approx(1.0, abs=1e-12)
    assert report.u_min == 1.0
    assert report.u_max == pytest.approx(4.0)


def test_steepness_of_series_uses_exact_derivative():
    report = steepness(ChebSeries(Interval(0.0, 2.0), [2.0, 1.0]))
    assert report.S == pytest.approx(1.0, rel=1e-9)


def test_steepness_of_sine():
    iv = Interval(0.0, 2.0 * math.pi)
    series = fit(np.sin(lobatto_nodes(24, iv)), iv)
    report = steepness(series)
    assert report.S == pytest.approx(math.pi, rel=1e-6)
    assert report.argmax_t in (0.0, 2.0 * math.pi)


def test_steepness_of_trajectory_column():
    times = np.linspace(0.0, 1.0, 201)
    states = np.column_stack([times, times**2])
    report = steepness(Trajectory(times=times, states=states), variable=1)
    assert report.S == pytest.approx(2.0, rel=1e-9)
    assert report.argmax_t == 1.0


@pytest.mark.edge_case
def test_steepness_of_constant_is_undefined():
    with pytest.raises(DomainError):
        steepness((np.linspace(0.0, 1.0, 10), np.full(10, 2.5)))
    with pytest.raises(ShapeError):
        steepness((np.array([0.0, 1.0]), np.array([0.0, 1.0])))


def test_transform_ti_structure(lorenz_problem):
    offset = np.array([0.1, -0.2, 0.3])
    ti = transform_ti(lorenz_problem, offset)
    state = np.array([0.5, 0.4, 0.3, 1.0, -1.0, 0.2])

    assert ti.dim == 6
    assert_allclose(ti.u0, np.concatenate([np.zeros(3), lorenz_problem.u0 + offset]))
    assert ti.labels[:3] == ("v_X", "v_Y", "v_Z")
    assert_allclose(
        ti.evaluate_rhs(0.0, state),
        np.concatenate([state[3:], lorenz_problem.evaluate_rhs(0.0, state[3:] - offset)]),
    )


def test_transform_ti_jacobian_is_consistent(lorenz_problem, rng):
    ti = transform_ti(lorenz_problem, 0.5)
    state = rng.normal(size=6)
    assert_allclose(
        ti.jacobian_at(0.0, state),
        central_difference_jacobian(ti.rhs, 0.0, state),
        rtol=1e-6,
        atol=1e-7,
    )


def test_ti_round_trip_recovers_solution(decay_problem):
    solution = solve_adaptive(transform_ti(decay_problem, 0.5), ACCURATE)
    u, _ = recover_from_ti(solution, 0.5)
    times = np.linspace(0.0, 1.0, 41)

    assert solution.completed
    assert_allclose(u.evaluate(times), decay_problem.exact(times), atol=1e-6)


def test_ti_round_trip_on_lorenz84(lorenz_problem):
    problem = lorenz_problem.with_span(0.0, 1.0)
    direct = solve_adaptive(problem, ACCURATE)
    ti = solve_adaptive(transform_ti(problem, 0.5), ACCURATE)
    u, _ = recover_from_ti(ti, 0.5)
    times = np.linspace(0.0, 1.0, 101)

    assert direct.completed
    assert ti.completed
    assert_allclose(u.evaluate(times), direct.sample(times), atol=1e-6)


def test_ti_lowers_steepness_of_fast_decay():
    problem = linear_test(lam=-10.0)
    offset = 1.0 - math.exp(-10.0)
    cfg = GwrmConfig(order=12, epsilon=1e-6)
    direct = solve_adaptive(problem, cfg)
    ti = solve_adaptive(transform_ti(problem, offset), cfg)

    original = steepness(direct)
    smoothed = steepness(ti, variable=0)
    assert original.S == pytest.approx(10.0, rel=1e-2)
    assert smoothed.S <= original.S
    assert smoothed.S == pytest.approx((1.0 + offset) / (1.1 * offset), rel=1e-2)


def test_ti_long_time_average(decay_problem):
    solution = solve_adaptive(transform_ti(decay_problem, 0.5), ACCURATE)
    _, long_time_average = recover_from_ti(solution, 0.5)
    times = np.linspace(0.1, 1.0, 10)

    assert_allclose(long_time_average(times)[0], (1.0 - np.exp(-times)) / times, atol=1e-7)
    assert_allclose(long_time_average(0.0), [1.0], atol=1e-7)
    assert_allclose(long_time_average(np.array([0.0, 1.0]))[:, 0], [1.0], atol=1e-7)


def test_lta_matches_ti_without_offset(decay_problem):
    lta = solve_adaptive(transform_lta(decay_problem), ACCURATE)
    ti = solve_adaptive(transform_ti(decay_problem), ACCURATE)

    assert transform_lta(decay_problem).labels == ("Z_u", "dZ_u")
    assert lta.interval_count == ti.interval_count
    for left, right in zip(lta.pieces, ti.pieces):
        assert_array_equal(left.coeffs, right.coeffs)


def test_auto_ti_offset_on_linear_decay(decay_problem):
    offset = auto_ti_offset(decay_problem)
    assert_allclose(offset, [1.0 - math.exp(-1.0)], atol=1e-3)


def test_transform_ta_initial_values():
    problem = linear_test()
    ta = transform_ta(problem, 0.1)

    assert ta.span == pytest.approx((0.1, 0.9))
    assert_allclose(ta.U0, [(1.0 - math.exp(-0.2)) / 0.2], atol=1e-9)
    assert_allclose(ta.problem.u0, [(math.exp(-0.2) - 1.0) / 0.2, (math.exp(-0.2) + 1.0) / 2.0])


def test_ta_recovers_running_average():
    problem = linear_test()
    delta = 0.1
    ta = transform_ta(problem, delta)
    solution = solve_adaptive(ta.problem, ACCURATE)
    averaged = recover_from_ta(solution, ta)
    times = np.linspace(0.1, 0.9, 17)

    assert solution.completed
    expected = np.exp(-times) * math.sinh(delta) / delta
    assert_allclose(averaged.evaluate(times)[0], expected, atol=1e-6)


def test_transform_ta_jacobian_is_consistent(lorenz_problem, rng):
    ta = transform_ta(lorenz_problem.with_span(0.0, 1.0), 0.05)
    state = rng.normal(size=6)
    assert_allclose(
        ta.problem.jacobian_at(0.5, state),
        central_difference_jacobian(ta.problem.rhs, 0.5, state),
        rtol=1e-6,
        atol=1e-6,
    )


@pytest.mark.edge_case
def test_transform_ta_rejects_short_span_and_bad_delta(decay_problem):
    with pytest.raises(DomainError):
        transform_ta(decay_problem, 0.5)
    with pytest.raises(DomainError):
        transform_ta(decay_problem, 0.0)


def test_running_average_oracle():
    value = running_average_oracle(lambda s: math.exp(-s), 0.1, 0.5)
    assert value == pytest.approx(math.exp(-0.5) * math.sinh(0.1) / 0.1, abs=1e-10)


@pytest.mark.edge_case
def test_running_average_oracle_outside_solution(decay_problem):
    solution = solve_adaptive(decay_problem)
    with pytest.raises(DomainError):
        running_average_oracle(solution.evaluate, 0.1, 0.95)


def test_ti_ledger_does_not_shrink_coefficient_count(decay_problem):
    ledger = smoothing_ledger(decay_problem, GwrmConfig(order=8, epsilon=1e-6), A=0.5)
    assert ledger["direct_intervals"] > 0
    assert ledger["ti_coefficients"] >= 0.9 * ledger["direct_coefficients"]


def test_total_coefficients_counts_every_variable(lorenz_problem):
    solution = solve_adaptive(lorenz_problem.with_span(0.0, 1.0), GwrmConfig(order=6))
    assert total_coefficients(solution) == 3 * 7 * solution.interval_count
