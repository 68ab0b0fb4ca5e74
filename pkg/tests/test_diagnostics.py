import numpy as np
import pytest
from numpy.testing import assert_allclose

from gwrm_kit.base import ConfigurationError, DomainError, ShapeError, UnsupportedAccuracyError
from gwrm_kit.diagnostics import (
    ClassifyThresholds,
    calibrate_modes,
    characteristic_polynomial,
    classify,
    count_extrema,
    count_solution_extrema,
    eigenvalues_small,
    estimate_modes,
    lle,
    lle_along,
    minimal_order,
    mode_economy,
)
from gwrm_kit.gwrm import GwrmConfig, solve_adaptive
from gwrm_kit.refsolvers import StepperConfig, rk4_adaptive


def test_characteristic_polynomial_of_diagonal_matrix():
    assert_allclose(characteristic_polynomial(np.diag([1.0, 2.0])), [1.0, -3.0, 2.0])


def test_eigenvalues_sorted_by_real_part():
    assert_allclose(eigenvalues_small(np.diag([1.0, -2.0, 3.0])), [3.0, 1.0, -2.0], atol=1e-12)


def test_eigenvalues_of_rotation_are_conjugate_pair():
    eigs = eigenvalues_small([[0.0, -1.0], [1.0, 0.0]])
    assert_allclose(eigs, [1j, -1j], atol=1e-12)
    assert eigs[0] == np.conj(eigs[1])


def test_eigenvalues_of_scalar():
    assert_allclose(eigenvalues_small([[-2400.0]]), [-2400.0])


@pytest.mark.parametrize(
    "matrix, error",
    [
        (np.ones((2, 3)), ShapeError),
        (np.array([[1.0, np.nan], [0.0, 1.0]]), DomainError),
        (np.eye(5), DomainError),
    ],
)
def test_eigenvalues_reject_unsupported_input(matrix, error):
    with pytest.raises(error):
        eigenvalues_small(matrix)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_eigenvalue_residuals_on_random_matrices(n, rng):
    for _ in range(300):
        J = rng.normal(size=(n, n))
        eigs = eigenvalues_small(J)
        norm = np.linalg.norm(J, 2)

        assert eigs.size == n
        assert abs(np.sum(eigs) - np.trace(J)) <= 1e-9 * max(1.0, norm)
        for gamma in eigs:
            smallest = np.linalg.svd(J - gamma * np.eye(n), compute_uv=False)[-1]
            assert smallest <= 1e-8 * max(1.0, norm)

        complex_part = eigs[np.abs(eigs.imag) > 0]
        assert_allclose(np.sort_complex(complex_part), np.sort_complex(complex_part.conj()))


def test_robertson_exponents_at_initial_state(robertson_problem):
    report = lle(robertson_problem, 0.0, [1.0, 0.0, 0.0])
    assert_allclose(report.eigenvalues, [0.0, 0.0, -0.04], atol=1e-12)
    assert report.classification == "neutral"


def test_robertson_is_stiff_once_y_is_populated(robertson_problem):
    report = lle(robertson_problem, 0.0, [1.0, 1e-6, 0.0], dt=1.0)
    eigs = report.eigenvalues.real

    assert abs(eigs[0]) <= 1e-9
    assert eigs[1] == pytest.approx(-0.05, rel=0.02)
    assert eigs[2] == pytest.approx(-60.0, rel=0.01)
    assert report.classification == "stiff"
    assert report.gamma_dt[2] == pytest.approx(60.0, rel=0.01)


def test_lorenz84_is_chaotic_at_initial_state(lorenz_problem):
    report = lle(lorenz_problem, 0.0, lorenz_problem.u0)
    eigs = report.eigenvalues

    assert eigs[0].real == pytest.approx(1.9, abs=0.05)
    assert eigs[1].real == pytest.approx(-1.1, abs=0.05)
    assert abs(eigs[1].imag) == pytest.approx(4.5, abs=0.05)
    assert report.classification == "chaotic"


@pytest.mark.parametrize(
    "eigs, expected",
    [
        ([0.0, 0.0, -0.04], "neutral"),
        ([0.0, -0.05, -2400.0], "stiff"),
        ([-2400.0], "stiff"),
        ([1.9, -1.1 + 4.5j, -1.1 - 4.5j], "chaotic"),
        ([1.0, -0.05, -2400.0], "both"),
        ([-1.0, -20.0], "neutral"),
        ([], "neutral"),
    ],
)
def test_classify(eigs, expected):
    assert classify(eigs) == expected


def test_classify_thresholds_are_configurable():
    thresholds = ClassifyThresholds(stiff=1.0, spread=10.0)
    assert classify([-1.0, -20.0], thresholds) == "stiff"
    assert ClassifyThresholds.from_mapping({"chaos": None, "spread": "10"}).spread == 10.0
    with pytest.raises(ConfigurationError):
        ClassifyThresholds(chaos=0.0)


def test_classify_keyword_thresholds_override_defaults():
    assert classify([-1.0, -20.0]) == "neutral"
    assert classify([-1.0, -20.0], stiff_threshold=1.0, spread=10.0) == "stiff"
    assert classify([0.5, -1.0]) == "chaotic"
    assert classify([0.5, -1.0], chaos_threshold=1.0) == "neutral"

    thresholds = ClassifyThresholds(stiff=1.0, spread=10.0)
    assert classify([-1.0, -20.0], thresholds, spread=100.0) == "neutral"
    assert thresholds.spread == 10.0
    with pytest.raises(ConfigurationError):
        classify([-1.0], stiff_threshold=-5.0)


def test_lle_rejects_wrong_state_length(lorenz_problem):
    with pytest.raises(ShapeError):
        lle(lorenz_problem, 0.0, [1.0, 2.0])


def test_lle_along_trajectory(lorenz_problem):
    times = [0.0, 0.5]
    states = [lorenz_problem.u0, [1.0, 0.5, -0.5]]
    reports = lle_along(lorenz_problem, times, states)
    assert [report.t for report in reports] == times
    assert reports[0].as_dict()["eigenvalues"][0][1] == 0.0


def test_count_extrema():
    assert count_extrema(np.sin(np.linspace(0.0, 2.0 * np.pi, 1000))) == 2
    assert count_extrema(np.exp(np.linspace(0.0, 1.0, 100))) == 0
    assert count_extrema([0.0, 1.0, 1.0, 1.0, 0.0]) == 1


@pytest.mark.edge_case
def test_count_extrema_needs_three_samples():
    with pytest.raises(DomainError):
        count_extrema([1.0, 2.0])


def test_count_solution_extrema_of_monotone_decay(decay_problem):
    solution = solve_adaptive(decay_problem)
    assert count_solution_extrema(solution) == {"u": 0}


@pytest.mark.parametrize(
    "N_e, epsilon, O_t, expected",
    [
        (1, 0.01, 0, 5),
        (2, 0.001, 0, 8),
        (0.72, 0.001, 3, 9),
        (0, 0.01, 0, 4),
    ],
)
def test_estimate_modes(N_e, epsilon, O_t, expected):
    assert estimate_modes(N_e, epsilon, O_t).K_a == expected


def test_estimate_modes_is_monotone():
    for epsilon in (0.01, 0.001):
        counts = [estimate_modes(n, epsilon).K_a for n in range(10)]
        assert counts == sorted(counts)
        assert estimate_modes(3, epsilon, 2).K_a >= estimate_modes(3, epsilon, 1).K_a


@pytest.mark.edge_case
def test_estimate_modes_rejects_uncalibrated_accuracy():
    with pytest.raises(UnsupportedAccuracyError):
        estimate_modes(2, 0.05)
    with pytest.raises(DomainError):
        estimate_modes(-1, 0.01)


def test_mode_economy_reports_estimate(lorenz_problem):
    solution = solve_adaptive(lorenz_problem.with_span(0.0, 5.0), GwrmConfig(epsilon=1e-3))
    economy = mode_economy(solution)

    assert economy["total_modes"] == solution.total_modes
    assert set(economy["extrema"]) == {"X", "Y", "Z"}
    assert economy["estimated_modes_per_interval"] >= 4
    assert solution.mode_economy(O_t=0)["interval_count"] == solution.interval_count


def test_minimal_order_of_low_degree_polynomial():
    assert minimal_order(lambda tau: tau**2 + 0.5, 0.01) == 2


def test_calibration_structure():
    result = calibrate_modes(n_signals=60, epsilon=0.01, seed=3)
    again = calibrate_modes(n_signals=60, epsilon=0.01, seed=3)

    assert sorted(result.buckets) == [1, 2, 3, 4, 5, 6]
    assert all(bucket.count == 10 for bucket in result.buckets.values())
    assert all(K >= 2 for _, K in result.samples)
    assert result.samples == again.samples
    assert result.buckets[6].mean_K > result.buckets[1].mean_K
    assert result.as_dict()["n_signals"] == 60


def test_calibration_agrees_with_linear_estimator():
    result = calibrate_modes(n_signals=100, epsilon=0.01, seed=0)

    assert sum(bucket.count for bucket in result.buckets.values()) == 100
    for bucket in result.buckets.values():
        assert abs(bucket.mean_K - bucket.predicted_K) <= 1.5


@pytest.mark.benchmark
def test_lorenz84_mode_economy_matches_estimate(lorenz_problem):
    solution = solve_adaptive(lorenz_problem, GwrmConfig(order=8, epsilon=1e-3))
    economy = mode_economy(solution)

    assert economy["total_modes"] == 9 * solution.interval_count
    assert economy["total_modes"] == pytest.approx(economy["estimated_total_modes"], rel=0.2)


@pytest.mark.benchmark
def test_lorenz84_extrema_agree_with_reference(lorenz_problem):
    spectral = solve_adaptive(lorenz_problem, GwrmConfig(order=8, epsilon=1e-3))
    reference = rk4_adaptive(lorenz_problem, StepperConfig(rel_tol=1e-10, abs_tol=1e-12, h0=1e-3))

    spectral_counts = count_solution_extrema(spectral)
    reference_counts = count_solution_extrema(reference, labels=lorenz_problem.labels)
    for label in lorenz_problem.labels:
        assert abs(spectral_counts[label] - reference_counts[label]) <= 2
    for label, expected in zip(lorenz_problem.labels, (19, 44, 41)):
        assert abs(reference_counts[label] - expected) <= 2
        assert abs(spectral_counts[label] - expected) <= 2
