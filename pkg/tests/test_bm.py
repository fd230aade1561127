# tests/test_bm.py
import numpy as np
import pytest

from bm.manifolds import BlockStiefel, GroupSpheres, UnitRows
from bm.solver import (
    BmConfig,
    bm_multistart,
    bm_solve,
    bm_thresholds,
    check_sosp,
    feasible_dual,
    gap_to_dual,
    hessian_matrix,
    manifold_for,
    multiplier_dual,
    objective,
    riemannian_gradient,
)
from core.errors import InvalidInput
from core.linalg import lambda_min
from core.rng import gaussian, gaussian_symmetric, make_rng
from instances.generators import maxcut, orthogonal_cut, product_sdp
from instances.graphs import random_graph
from sdp.model import slack
from sdp.solver import solve

MANIFOLDS = [
    UnitRows(6, 3),
    GroupSpheres([[0, 1], [2, 3, 4], [5]], 3),
    BlockStiefel(3, 2, 3),
]


@pytest.mark.parametrize("manifold", MANIFOLDS, ids=lambda m: m.kind)
def test_random_points_and_tangent_spaces(manifold):
    rng = make_rng(1)
    F = manifold.random_point(rng)
    assert manifold.contains(F)

    # Step 1: projection is idempotent
    G = gaussian(rng, manifold.shape)
    P = manifold.project(F, G)
    assert np.allclose(manifold.project(F, P), P)

    # Step 2: the tangent basis is orthonormal with the expected dimension
    basis = manifold.tangent_basis(F)
    assert basis.shape == (6 * 3, manifold.dimension)
    assert np.allclose(basis.T @ basis, np.eye(manifold.dimension), atol=1e-10)

    # Step 3: retraction stays on the manifold
    assert manifold.contains(manifold.retract(F + 0.3 * P))


def test_manifold_validation():
    with pytest.raises(InvalidInput):
        BlockStiefel(3, 3, 2)
    with pytest.raises(InvalidInput):
        UnitRows(4, 5)
    with pytest.raises(InvalidInput):
        UnitRows(4, 2).retract(np.zeros((4, 2)))


@pytest.mark.parametrize("manifold", MANIFOLDS, ids=lambda m: m.kind)
def test_gradient_matches_finite_differences(manifold):
    rng = make_rng(2)
    C = gaussian_symmetric(rng, 6)
    F = manifold.random_point(rng)
    D = manifold.project(F, gaussian(rng, manifold.shape))
    t = 1e-6

    fd = (objective(C, manifold.retract(F + t * D)) - objective(C, manifold.retract(F - t * D))) / (2 * t)
    assert fd == pytest.approx(np.vdot(riemannian_gradient(manifold, C, F), D), rel=1e-5, abs=1e-7)


@pytest.mark.parametrize("manifold", MANIFOLDS[:2], ids=lambda m: m.kind)
def test_hessian_matches_finite_differences(manifold):
    rng = make_rng(3)
    C = gaussian_symmetric(rng, 6)
    F = manifold.random_point(rng)
    H, basis = hessian_matrix(manifold, C, F)
    v = gaussian(rng, basis.shape[1])
    D = (basis @ v).reshape(manifold.shape)
    t = 1e-4

    second = (
        objective(C, manifold.retract(F + t * D))
        + objective(C, manifold.retract(F - t * D))
        - 2 * objective(C, F)
    ) / t**2
    assert second == pytest.approx(v @ H @ v, rel=1e-4, abs=1e-5)


def test_manifold_dispatch():
    cut = maxcut(random_graph(6, 0.5, seed=0))
    assert manifold_for(cut, 2).kind == "unit-rows"

    product = product_sdp([[0, 1], [2, 3]], np.eye(4))
    assert manifold_for(product, 2).kind == "group-spheres"

    ocut = orthogonal_cut(3, 2, np.eye(6))
    assert manifold_for(ocut, 3).kind == "block-stiefel"
    with pytest.raises(InvalidInput):
        manifold_for(ocut, 1)


def test_bm_reaches_sdp_optimum(small_maxcut):
    """
    Test the factorized solver against the convex one:
    1. Solve the SDP
    2. Run BM above the benign rank
    3. Check value, stationarity and the multiplier dual
    """

    # Step 1: Solve the SDP
    p_star = solve(small_maxcut.sdp).primal_obj

    # Step 2: Run BM with r(r+1)/2 > m
    result = bm_solve(small_maxcut, 5, seed=0)

    # Step 3: Check the result
    assert result.sosp
    assert result.objective == pytest.approx(p_star, abs=1e-4 * (1 + abs(p_star)))
    check = check_sosp(small_maxcut, result.F)
    assert check.sosp
    y = feasible_dual(small_maxcut, result.multiplier_y)
    assert lambda_min(slack(small_maxcut.sdp, y)) >= -1e-8
    assert gap_to_dual(small_maxcut, result.F, y) >= -1e-8


def test_bm_is_reproducible(small_maxcut):
    first = bm_solve(small_maxcut, 3, seed=4)
    second = bm_solve(small_maxcut, 3, seed=4)
    assert np.array_equal(first.F, second.F)
    with pytest.raises(InvalidInput):
        bm_solve(small_maxcut, 3)


def test_check_sosp_rejects_points_off_the_manifold(small_maxcut):
    with pytest.raises(InvalidInput):
        check_sosp(small_maxcut, np.ones((12, 2)))


def test_multiplier_dual_at_optimum(small_maxcut):
    result = bm_solve(small_maxcut, 5, seed=1)
    manifold = manifold_for(small_maxcut, 5)
    y = multiplier_dual(small_maxcut, manifold, result.F)
    # at a critical point the slack annihilates F
    assert np.linalg.norm(slack(small_maxcut.sdp, y) @ result.F) <= 1e-5 * (1 + np.linalg.norm(small_maxcut.sdp.C))


def test_gap_to_dual_requires_feasible_y(small_maxcut):
    F = UnitRows(12, 2).random_point(make_rng(0))
    with pytest.raises(InvalidInput):
        gap_to_dual(small_maxcut, F, np.full(12, 1e3))


def test_rank_thresholds():
    assert bm_thresholds("unit-rows", 30, 30, 9) == {
        "kind": "unit-rows",
        "n": 30,
        "m": 30,
        "r": 9,
        "d": 1,
        "benign": True,
        "failure_possible": False,
    }
    low = bm_thresholds("unit-rows", 30, 30, 2)
    assert low["failure_possible"] and not low["benign"]
    assert bm_thresholds("block-stiefel", 20, 30, 3, d=2)["failure_possible"]
    with pytest.raises(InvalidInput):
        bm_thresholds("torus", 4, 4, 2)


def test_multistart_has_no_witnesses_in_the_benign_regime(small_maxcut):
    multi = bm_multistart(small_maxcut, 5, starts=3, seed=0)
    assert [res.seed for res in multi.results] == [0, 1, 2]
    assert multi.errors == {}
    assert multi.failure_witnesses == []
    assert multi.thresholds["benign"]
    for res in multi.results:
        assert res.gap_to_dual >= -1e-8


@pytest.mark.slow
def test_maxcut_gaussian_cost_multistart():
    from instances.instance import Instance
    from sdp.model import StandardFormSDP

    n = 30
    C = gaussian_symmetric(make_rng(11), n)
    sdp = StandardFormSDP.from_triplets(C, [(k, k, k, 1.0) for k in range(n)], np.ones(n), label="gauss-30")
    inst = Instance(sdp, "maxcut", {"family": "maxcut", "n": n})
    p_star = solve(sdp).primal_obj

    multi = bm_multistart(inst, 9, starts=10, seed=0, cfg=BmConfig())
    assert len(multi.results) == 10
    for res in multi.results:
        assert res.objective == pytest.approx(p_star, abs=1e-4 * (1 + abs(p_star)))
        assert check_sosp(inst, res.F).sosp
