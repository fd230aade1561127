# tests/test_solver.py
import numpy as np
import pytest

from core.errors import Infeasible, InvalidInput, NumericalBreakdown
from core.linalg import orthonormal_basis, sym
from instances.generators import random_simple_instance
from sdp.model import SolveStatus, StandardFormSDP, residuals
from sdp.solver import SolverConfig, polish, solve, solve_restricted


def test_two_by_two_optimum(two_by_two):
    sol = solve(two_by_two)
    assert sol.converged
    assert sol.primal_obj == pytest.approx(-2.0, abs=1e-6)
    assert sol.dual_obj == pytest.approx(-2.0, abs=1e-6)
    assert np.allclose(sol.X, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-5)


def test_recovers_planted_solution(simple_instance):
    sol = solve(simple_instance.sdp)
    assert sol.converged
    assert np.linalg.norm(sol.X - simple_instance.truth.X_star) <= 1e-5
    assert np.linalg.norm(sol.y - simple_instance.truth.y_star) <= 1e-4


def test_inconsistent_constraints_are_infeasible():
    sdp = StandardFormSDP.from_triplets(
        np.eye(2), [(0, 0, 0, 1.0), (1, 0, 0, 1.0)], [1.0, 2.0]
    )
    with pytest.raises(Infeasible):
        solve(sdp)


def test_redundant_constraints_are_rejected():
    sdp = StandardFormSDP.from_triplets(
        np.eye(2), [(0, 0, 0, 1.0), (1, 0, 0, 1.0)], [1.0, 1.0]
    )
    with pytest.raises(InvalidInput):
        solve(sdp)


def test_iteration_cap_returns_best_iterate(simple_instance):
    sol = solve(simple_instance.sdp, SolverConfig(max_iters=5, check_every=1))
    assert sol.status == SolveStatus.MAX_ITERATIONS
    assert not sol.converged
    assert sol.iterations == 5


def test_solve_is_deterministic(simple_instance):
    first = solve(simple_instance.sdp)
    second = solve(simple_instance.sdp)
    assert np.array_equal(first.X, second.X)
    assert np.array_equal(first.y, second.y)


def test_polish_never_worsens_residuals(simple_instance):
    sdp = simple_instance.sdp
    rough = solve(sdp, SolverConfig(tol_feas=1e-4, tol_gap=1e-4, polish=False))
    X, y = polish(sdp, rough.X, rough.y)
    assert residuals(sdp, X, y).worst() <= residuals(sdp, rough.X, rough.y).worst()


def test_restricted_dual_on_the_null_space(two_by_two):
    U = np.ones((2, 1)) / np.sqrt(2.0)

    # the off-diagonal entry of U Z_s U^T is pinned to C[0, 1] = 1
    Z_s = solve_restricted(two_by_two, U, np.eye(1))
    assert Z_s[0, 0] == pytest.approx(2.0, abs=1e-5)
    assert np.allclose(U @ Z_s @ U.T, np.ones((2, 2)), atol=1e-5)

    with pytest.raises(InvalidInput):
        solve_restricted(two_by_two, np.ones((2, 1)), np.eye(1))
    with pytest.raises(InvalidInput):
        solve_restricted(two_by_two, U, np.eye(2))


def test_restricted_solve_that_stops_early_is_a_breakdown(small_maxcut):
    sol = solve(small_maxcut.sdp)
    U = orthonormal_basis(sol.X, 1e-6, "null")
    C_s = sym(np.random.default_rng(0).standard_normal((U.shape[1], U.shape[1])))

    with pytest.raises(NumericalBreakdown):
        solve_restricted(small_maxcut.sdp, U, C_s, SolverConfig(max_iters=1))


def test_config_validation():
    with pytest.raises(InvalidInput):
        SolverConfig(alpha=2.5)
    with pytest.raises(InvalidInput):
        SolverConfig(tol_feas=0.0)
    with pytest.raises(InvalidInput):
        SolverConfig(rho=-1.0)


@pytest.mark.slow
def test_simple_from_psd_suite():
    from sdp.certifier import certify

    simple = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 13))
        inst = random_simple_instance(n, int(rng.integers(1, n + 1)), seed)
        sol = solve(inst.sdp)
        assert np.linalg.norm(sol.X - inst.truth.X_star) <= 1e-5
        assert np.linalg.norm(sol.y - inst.truth.y_star) <= 1e-4
        simple += certify(inst.sdp, sol).flags.simple
    assert simple >= 99
