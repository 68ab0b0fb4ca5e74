import numpy as np
import pytest
from numpy.testing import assert_allclose

from gwrm_kit.base import ConfigurationError, DivergenceError, EvaluationError, SingularSystemError
from gwrm_kit.sir import SolverConfig, jacobian_fd, solve_fixed_point


def cosine_map(x):
    return np.cos(x)


def arctan_map(x):
    # Fixed point at 0; undamped Newton diverges from |x| > 1.39
    return x - np.arctan(x)


def arctan_jacobian(x):
    return np.array([[1.0 - 1.0 / (1.0 + x[0] ** 2)]])


def test_picard_converges_on_contraction():
    x, stats = solve_fixed_point(lambda x: 0.5 * x + 1.0, np.array([0.0]), SolverConfig("picard"))
    assert stats.converged
    assert_allclose(x, [2.0], atol=1e-9)
    assert stats.jacobian_evals == 0


def test_newton_converges_quadratically():
    cfg = SolverConfig(mode="newton", jacobian_reuse=1, tol=1e-12)
    x, stats = solve_fixed_point(cosine_map, np.array([1.0]), cfg)

    assert stats.converged
    assert_allclose(x, [0.7390851332151607], atol=1e-12)
    residuals = [r for r in stats.residuals if r > 1e-8]
    for before, after in zip(residuals, residuals[1:]):
        assert after <= 2.0 * before**2


def test_newton_solves_linear_map_in_one_step():
    matrix = np.array([[0.2, 0.1], [-0.3, 0.4]])
    offset = np.array([1.0, -2.0])
    cfg = SolverConfig(mode="newton", tol=1e-6)

    x, stats = solve_fixed_point(lambda x: matrix @ x + offset, np.zeros(2), cfg)

    assert stats.iterations == 1
    assert_allclose(x, np.linalg.solve(np.eye(2) - matrix, offset), rtol=1e-7)


def test_exact_guess_needs_no_iterations():
    x, stats = solve_fixed_point(lambda x: 0.5 * x + 1.0, np.array([2.0]))
    assert stats.iterations == 0
    assert stats.converged
    assert stats.final_residual == 0.0


def test_semi_implicit_damping_rescues_divergent_newton():
    cfg = SolverConfig(mode="semi_implicit", jacobian_reuse=1)
    x, stats = solve_fixed_point(arctan_map, np.array([2.0]), cfg, jacobian=arctan_jacobian)

    assert stats.converged
    assert_allclose(x, [0.0], atol=1e-9)
    assert all(b <= a for a, b in zip(stats.residuals, stats.residuals[1:]))


def test_undamped_newton_fails_where_damping_succeeds():
    cfg = SolverConfig(mode="newton", jacobian_reuse=1, max_iters=20)
    with pytest.raises((DivergenceError, SingularSystemError)):
        solve_fixed_point(arctan_map, np.array([2.0]), cfg, jacobian=arctan_jacobian)


def test_semi_implicit_with_reused_jacobian():
    cfg = SolverConfig(mode="semi_implicit", jacobian_reuse=3)
    x, stats = solve_fixed_point(cosine_map, np.array([1.0]), cfg)
    assert stats.converged
    assert_allclose(x, [0.7390851332151607], atol=1e-9)
    assert stats.jacobian_evals < stats.iterations


@pytest.mark.parametrize(
    "mapping",
    [lambda x: 0.5 * x + 1.0, lambda x: 0.5 * np.sin(x) + 1.0],
)
def test_semi_implicit_needs_no_more_iterations_than_picard(mapping):
    start = np.array([0.0])
    _, picard = solve_fixed_point(mapping, start, SolverConfig("picard"))
    _, damped = solve_fixed_point(mapping, start, SolverConfig("semi_implicit"))

    assert picard.converged
    assert damped.converged
    assert damped.iterations <= picard.iterations


def test_exhausted_budget_is_reported_not_raised():
    cfg = SolverConfig(mode="picard", max_iters=10)
    x, stats = solve_fixed_point(lambda x: 1.0 - x, np.array([0.0]), cfg)
    assert not stats.converged
    assert stats.iterations == 10
    assert stats.final_residual == pytest.approx(1.0)


def test_picard_divergence_raises():
    with pytest.raises(DivergenceError):
        solve_fixed_point(lambda x: x * x + 1.0, np.array([2.0]), SolverConfig("picard"))


def test_singular_newton_matrix_raises():
    with pytest.raises(SingularSystemError):
        solve_fixed_point(
            lambda x: x + 1.0,
            np.array([0.0, 0.0]),
            SolverConfig("newton"),
            jacobian=lambda x: np.eye(2),
        )


def test_solution_keeps_input_shape():
    x, stats = solve_fixed_point(lambda x: 0.5 * x, np.ones((2, 3)), SolverConfig("newton"))
    assert x.shape == (2, 3)
    assert stats.converged


def test_jacobian_fd_of_linear_map(rng):
    matrix = rng.normal(size=(3, 3))
    assert_allclose(jacobian_fd(lambda x: matrix @ x, rng.normal(size=3)), matrix, atol=1e-6)


def test_jacobian_fd_rejects_non_finite_values():
    with pytest.raises(EvaluationError):
        jacobian_fd(lambda x: np.log(x), np.array([-1.0]))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"mode": "anderson"},
        {"tol": 0.0},
        {"max_iters": 0},
        {"jacobian_reuse": 0},
        {"damping_init": 1.5},
    ],
)
def test_solver_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        SolverConfig(**kwargs)


def test_solver_config_from_mapping_casts_strings():
    cfg = SolverConfig.from_mapping({"mode": "newton", "tol": "1e-8", "max_iters": "12"})
    assert cfg == SolverConfig(mode="newton", tol=1e-8, max_iters=12)
    assert SolverConfig.from_mapping(None) == SolverConfig()
    with pytest.raises(ConfigurationError):
        SolverConfig.from_mapping({"tol": "tiny"})
