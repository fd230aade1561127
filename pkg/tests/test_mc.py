# tests/test_mc.py
import math

import numpy as np
import pytest

from core.errors import InvalidInput
from core.linalg import eigvals_sym, rank_eps
from mc.duals import compare_restricted_duals, dual_multiplicity_demo, lifted_dual_from_Y
from mc.golfing import golfing_certificate, golfing_pass_rate, golfing_schedule
from mc.problem import (
    default_probability,
    from_matrix,
    incoherence,
    lifted_truth,
    mc_generate,
    mc_lift,
    nuclear_norm_sdp,
    problem_from_instance,
    proj_omega,
    proj_T,
    proj_T_perp,
)
from sdp.certifier import certify, dual_uniqueness_necessary
from sdp.model import apply_A, slack
from sdp.solver import solve


def test_generated_problem_structure(full_mc):
    assert full_mc.mask.all()
    assert len(full_mc.omega) == 36
    assert np.allclose(full_mc.U.T @ full_mc.U, np.eye(2))
    assert np.allclose((full_mc.U * full_mc.sigma) @ full_mc.V.T, full_mc.X_natural)
    assert full_mc.mu >= 1.0 - 1e-12

    partial = mc_generate(10, 8, 2, 0.5, seed=1)
    assert partial.omega == sorted(partial.omega)
    assert 0 < partial.mask.sum() < 80

    with pytest.raises(InvalidInput):
        mc_generate(5, 5, 6, 0.5, seed=0)
    with pytest.raises(InvalidInput):
        mc_generate(5, 5, 2, 0.0, seed=0)


def test_incoherence_of_coordinate_vectors():
    U = np.eye(4)[:, :1]
    V = np.ones((4, 1)) / 2.0
    assert incoherence(U, V) == pytest.approx(4.0)


def test_projectors(full_mc, rng):
    U, V = full_mc.U, full_mc.V
    M = rng.standard_normal((6, 6))
    PT = proj_T(U, V, M)

    assert np.allclose(proj_T(U, V, PT), PT)
    assert np.allclose(PT + proj_T_perp(U, V, M), M)
    assert np.allclose(proj_T(U, V, proj_T_perp(U, V, M)), 0, atol=1e-12)
    assert np.allclose(proj_T(U, V, U @ V.T), U @ V.T)

    mask = rng.random((6, 6)) < 0.5
    assert np.array_equal(proj_omega(mask, M) != 0, mask & (M != 0))


def test_lift_is_feasible_for_the_truth(full_mc):
    inst = mc_lift(full_mc)
    X_tilde = lifted_truth(full_mc)

    assert inst.sdp.n == 12 and inst.sdp.m == 36
    assert np.allclose(apply_A(inst.sdp, X_tilde), inst.sdp.b)
    assert rank_eps(eigvals_sym(X_tilde)).rank == 2
    assert np.trace(X_tilde) == pytest.approx(2 * full_mc.sigma.sum())
    assert inst.sdp.coordinate_pattern() is not None

    restored = problem_from_instance(inst)
    assert np.array_equal(restored.mask, full_mc.mask)
    assert np.allclose(restored.X_natural, full_mc.X_natural)


def test_nuclear_norm_dual_is_the_closed_form(full_mc):
    nn = nuclear_norm_sdp(full_mc.X_natural)
    Z = slack(nn.instance.sdp, nn.y_star)
    assert np.allclose(Z, np.eye(12) - nn.Y_tilde)
    assert nn.instance.sdp.b @ nn.y_star == pytest.approx(2 * full_mc.sigma.sum())


def test_lifted_dual_from_full_observation(full_mc):
    lifted = lifted_dual_from_Y(full_mc, full_mc.U @ full_mc.V.T)
    report = lifted.report

    assert report.psd
    assert report.null_residual <= 1e-10
    assert report.lambda_gap == pytest.approx(1.0)
    assert report.strict_gap_ok
    assert report.rank_slack == 12 - 2
    assert report.duality_gap <= 1e-9


def test_lifted_dual_rejects_entries_off_omega():
    prob = mc_generate(6, 6, 1, 0.5, seed=2)
    Y = np.ones((6, 6))
    with pytest.raises(InvalidInput):
        lifted_dual_from_Y(prob, Y)
    with pytest.raises(InvalidInput):
        lifted_dual_from_Y(prob, np.zeros((5, 6)))


def test_golfing_schedule(full_mc):
    k0, t0, q = golfing_schedule(full_mc, C0=4.0)
    assert k0 == max(1, math.ceil(4.0 * math.log(full_mc.mu * full_mc.r)))
    assert t0 == math.ceil(2 * math.log(6)) + 2
    assert q == 1.0
    with pytest.raises(InvalidInput):
        golfing_schedule(full_mc, C0=0.0)


def test_golfing_with_full_observation_is_exact():
    prob = mc_generate(20, 20, 2, 1.0, seed=3)
    result = golfing_certificate(prob, seed=3)

    assert np.allclose(result.Y, prob.U @ prob.V.T)
    assert result.checks.omega_ok
    assert result.checks.tangent_residual <= 1e-12
    assert result.checks.perp_norm <= 1e-12
    assert result.checks.passed
    assert result.checks.to_dict()["passed"]


def test_golfing_pass_rate_reports_every_trial():
    sweep = golfing_pass_rate(20, 1, 1.0, count=3, seed=0)
    assert [trial["seed"] for trial in sweep["trials"]] == [0, 1, 2]
    assert sweep["pass_rate"] == 1.0


def test_dual_uniqueness_fails_for_lifted_completion():
    p = default_probability(30, 2)
    assert p == pytest.approx(min(1.0, 6 * math.log(30) / 30))
    prob = mc_generate(30, 30, 2, p, seed=0)
    inst = mc_lift(prob)
    assert not dual_uniqueness_necessary(inst.sdp.n, inst.sdp.m, prob.r)


def test_from_matrix_detects_rank():
    X = np.outer([1.0, 2.0, 3.0], [1.0, -1.0])
    prob = from_matrix(X)
    assert prob.r == 1
    with pytest.raises(InvalidInput):
        from_matrix(X, r=2)


@pytest.mark.slow
def test_lifted_solve_and_certificate():
    recovered = 0
    for seed in range(10):
        prob = mc_generate(30, 30, 2, default_probability(30, 2), seed)
        inst = mc_lift(prob)
        sol = solve(inst.sdp)
        if np.linalg.norm(sol.X - inst.truth.X_star) <= 1e-4:
            recovered += 1
            report = certify(inst.sdp, sol)
            assert not report.flags.dual_unique
    assert recovered >= 7


@pytest.mark.slow
def test_dual_multiplicity_demo():
    prob = mc_generate(30, 30, 2, default_probability(30, 2), seed=0)
    report = dual_multiplicity_demo(prob, seed=0)
    assert report.multiplicity
    assert not report.necessary_condition
    assert report.distance > 1e-3 * max(np.linalg.norm(report.spectrum_identity), 1.0)


@pytest.mark.slow
def test_restricted_duals_agree_on_a_simple_instance(simple_instance):
    report = compare_restricted_duals(simple_instance, seed=1)
    assert not report.multiplicity


@pytest.mark.slow
def test_golfing_pass_rate_at_generous_probability():
    sweep = golfing_pass_rate(60, 2, 0.99, count=10, seed=0, C0=1.0)
    assert sweep["pass_rate"] >= 0.8
    for trial in sweep["trials"]:
        if trial["passed"]:
            assert trial["tangent_residual"] <= 1e-6
