# tests/test_certifier.py
import numpy as np
import pytest

from core.errors import DegenerateInputWarning, InvalidInput
from db.documents import ResidualsDoc, SimplicityFlags, SimplicityReport
from sdp.certifier import (
    TABLE1_REFERENCE,
    certify,
    compare_to_reference,
    dual_uniqueness_necessary,
    instance_hash,
    operator_spectrum,
    render_table,
)
from sdp.model import SolverSolution
from sdp.solver import solve


def _report(label="G1", rank_p=13, rank_d=787, kappa_AZ=4.083, kappa_AX=2.026):
    return SimplicityReport(
        label=label,
        n=800,
        m=800,
        eps=1e-6,
        rank_p=rank_p,
        rank_d=rank_d,
        lambda_minpos_X=1.0,
        lambda_minpos_Z=1.0,
        kappa_X=14.0,
        kappa_Z=3269.0,
        sigma_min_AZ=1.0,
        sigma_max_AZ=kappa_AZ,
        kappa_AZ=kappa_AZ,
        sigma_min_AX=1.0,
        sigma_max_AX=kappa_AX,
        kappa_AX=kappa_AX,
        gap=0.0,
        primal_obj=-1.0,
        dual_obj=-1.0,
        residuals=ResidualsDoc(primal_infeas=0.0, dual_infeas=0.0, cone_infeas=0.0, gap=0.0),
        flags=SimplicityFlags(
            surjective=True,
            strong_duality=True,
            strict_complementarity=True,
            primal_unique=True,
            dual_unique=True,
        ),
    )


def test_planted_instance_is_simple(simple_instance):
    """
    Test the full protocol on a simple-from-PSD instance:
    1. Solve the instance
    2. Certify the solution
    3. Check ranks, flags and hashes
    """

    # Step 1: Solve
    sdp = simple_instance.sdp
    sol = solve(sdp)

    # Step 2: Certify
    report = certify(sdp, sol)

    # Step 3: Check the report
    assert report.rank_p == 2
    assert report.rank_d == sdp.n - 2
    assert report.flags.simple
    assert report.flags.primal_simple
    assert report.kappa_AZ is not None and report.kappa_AX is not None
    assert report.input_hashes["instance"] == instance_hash(sdp)


@pytest.mark.parametrize("factor", [0.5, 2.0])
def test_flags_survive_rescaled_constraints(simple_instance, factor):
    sdp = simple_instance.sdp
    base = certify(sdp, solve(sdp))

    scaled = sdp.scaled(factor)
    report = certify(scaled, solve(scaled))
    assert report.flags == base.flags
    assert report.flags.simple
    assert (report.rank_p, report.rank_d) == (base.rank_p, base.rank_d)


def test_inaccurate_solution_is_flagged(simple_instance):
    sdp = simple_instance.sdp
    sol = solve(sdp)
    rough = SolverSolution(sdp, sol.X + 1e-3 * np.eye(sdp.n), sol.y)

    with pytest.warns(DegenerateInputWarning):
        report = certify(sdp, rough)
    assert report.warnings


def test_certify_rejects_mismatched_solution(simple_instance, two_by_two):
    sol = solve(two_by_two)
    with pytest.raises(InvalidInput):
        certify(simple_instance.sdp, sol)


def test_operator_spectrum_edge_cases():
    empty = operator_spectrum(np.zeros((4, 0)))
    assert empty.injective and empty.kappa is None

    wide = operator_spectrum(np.ones((2, 3)))
    assert wide.sigma_min == 0.0 and not wide.injective

    square = operator_spectrum(np.diag([2.0, 1.0]))
    assert square.injective
    assert square.kappa == pytest.approx(2.0)

    nearly_singular = operator_spectrum(np.diag([1.0, 1e-9]))
    assert not nearly_singular.injective


def test_dual_uniqueness_necessary_condition():
    # n = 4, m = 10 leaves no room for a nontrivial dual face
    assert dual_uniqueness_necessary(4, 10, 4)
    assert not dual_uniqueness_necessary(4, 10, 3)
    assert dual_uniqueness_necessary(4, 4, 2)
    assert dual_uniqueness_necessary(4, 4, 1)
    assert dual_uniqueness_necessary(2, 3, 2)
    with pytest.raises(InvalidInput):
        dual_uniqueness_necessary(4, 4, 5)


def test_compare_to_reference():
    assert set(TABLE1_REFERENCE) == {f"G{k}" for k in range(1, 21)}

    close = compare_to_reference(_report(kappa_AZ=4.5), "G1")
    assert close["rank_p_match"] and close["rank_d_match"]
    assert close["within_tolerance"]

    far = compare_to_reference(_report(kappa_AZ=8.0), "G1")
    assert not far["within_tolerance"]

    wrong_rank = compare_to_reference(_report(rank_p=14), "G1")
    assert not wrong_rank["rank_p_match"]

    with pytest.raises(InvalidInput):
        compare_to_reference(_report(), "G99")


def test_render_table():
    text = render_table([_report(), _report(label="G2")])
    lines = text.splitlines()
    assert len(lines) == 4
    assert "rank_p" in lines[0] and "k(A*_X)" in lines[0]
    assert "G2" in lines[3]
    assert "True" in lines[2]
