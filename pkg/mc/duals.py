"""
Dual solutions of the lifted matrix-completion SDP.

A certificate Y supported on Omega embeds as the lifted slack
I - [0, Y; Y^T, 0], i.e. y_ij = 2 Y_ij. Dual multiplicity is exhibited by
solving the dual restricted to the optimal face twice with different
objectives and comparing the two slacks.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from core.config import RANK_EPS
from core.errors import InvalidInput
from core.linalg import eig_sym, eigvals_sym, orthonormal_basis, rank_eps
from core.rng import gaussian_symmetric, make_rng
from instances.instance import Instance
from mc.problem import McProblem, lifted_truth, mc_lift, proj_omega
from sdp.certifier import dual_uniqueness_necessary
from sdp.solver import SolverConfig, solve, solve_restricted

logger = logging.getLogger(__name__)

STRICT_GAP = 3.0 / 8.0
MULTIPLICITY_REL = 1e-3


@dataclass
class StrictCompReport:
    lambda_min: float
    psd: bool
    null_residual: float
    complementarity: float
    lambda_gap: float
    strict_gap_ok: bool
    rank_slack: int
    primal_value: float
    dual_value: float

    @property
    def duality_gap(self) -> float:
        return abs(self.primal_value - self.dual_value)


@dataclass
class LiftedDual:
    y: NDArray
    Y_tilde: NDArray
    report: StrictCompReport


def lift_certificate(prob: McProblem, Y: NDArray) -> NDArray:
    n1, n2 = prob.n1, prob.n2
    return np.block([[np.zeros((n1, n1)), Y], [Y.T, np.zeros((n2, n2))]])


def lifted_dual_from_Y(prob: McProblem, Y: NDArray, eps: float = RANK_EPS) -> LiftedDual:
    """Embed Y and check the complementarity properties of I - Y~."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (prob.n1, prob.n2):
        raise InvalidInput(f"certificate must be {prob.n1}x{prob.n2}, got {Y.shape}")
    if np.linalg.norm(proj_omega(prob.mask, Y) - Y) > 0:
        raise InvalidInput("certificate has entries outside the observed set")

    y = np.array([2.0 * Y[i, j] for i, j in prob.omega])
    Y_tilde = lift_certificate(prob, Y)
    N = prob.n1 + prob.n2
    Z = np.eye(N) - Y_tilde
    values = eigvals_sym(Z)
    X_star = lifted_truth(prob)
    W = np.vstack([prob.U, prob.V])
    lambda_gap = float(values[N - prob.r - 1])
    report = StrictCompReport(
        lambda_min=float(values[-1]),
        psd=bool(values[-1] >= -1e-10),
        null_residual=float(np.linalg.norm(Z @ W)),
        complementarity=float(np.vdot(X_star, Z)),
        lambda_gap=lambda_gap,
        strict_gap_ok=lambda_gap >= STRICT_GAP - 1e-6,
        rank_slack=rank_eps(values, eps).rank,
        primal_value=float(np.trace(X_star)),
        dual_value=2.0 * float(np.vdot(prob.X_natural, Y)),
    )
    logger.info(
        f"Lifted dual: lambda_min={report.lambda_min:.3e}, gap eigenvalue {lambda_gap:.4f}, "
        f"duality gap {report.duality_gap:.2e}"
    )
    return LiftedDual(y, Y_tilde, report)


@dataclass
class MultiplicityReport:
    label: str
    n: int
    m: int
    rank_p: int
    spectrum_identity: NDArray
    spectrum_random: NDArray
    distance: float
    multiplicity: bool
    necessary_condition: bool
    traces: tuple[float, float]
    primal_error: float | None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "m": self.m,
            "rank_p": self.rank_p,
            "spectrum_identity": self.spectrum_identity.tolist(),
            "spectrum_random": self.spectrum_random.tolist(),
            "distance": self.distance,
            "multiplicity": self.multiplicity,
            "dual_uniqueness_necessary": self.necessary_condition,
            "traces": list(self.traces),
            "primal_error": self.primal_error,
        }


def compare_restricted_duals(
    instance: Instance, cfg: SolverConfig | None = None, seed: int = 0, eps: float = RANK_EPS
) -> MultiplicityReport:
    """
    Solve the instance, then maximize <C_s, Z_s> over dual slacks U Z_s U^T
    supported on the null space of X* for C_s = I and C_s Gaussian.
    """
    cfg = cfg or SolverConfig()
    sdp = instance.sdp
    sol = solve(sdp, cfg)
    dec = eig_sym(sol.X)
    r = rank_eps(dec.values, eps).rank
    U = orthonormal_basis(sol.X, eps, "null")
    if U.shape[1] == 0:
        raise InvalidInput(f"{instance.label}: the primal solution has full rank")

    restricted_cfg = replace(cfg, polish=False)
    k = U.shape[1]
    Z_identity = U @ solve_restricted(sdp, U, np.eye(k), restricted_cfg) @ U.T
    C_random = gaussian_symmetric(make_rng(seed), k)
    Z_random = U @ solve_restricted(sdp, U, C_random, restricted_cfg) @ U.T

    distance = float(np.linalg.norm(Z_identity - Z_random))
    threshold = MULTIPLICITY_REL * max(float(np.linalg.norm(Z_identity)), 1.0)
    primal_error = None
    if instance.truth is not None:
        primal_error = float(np.linalg.norm(sol.X - instance.truth.X_star))

    report = MultiplicityReport(
        label=sdp.label,
        n=sdp.n,
        m=sdp.m,
        rank_p=r,
        spectrum_identity=eigvals_sym(Z_identity),
        spectrum_random=eigvals_sym(Z_random),
        distance=distance,
        multiplicity=distance > threshold,
        necessary_condition=dual_uniqueness_necessary(sdp.n, sdp.m, r),
        traces=(float(np.trace(Z_identity)), float(np.trace(Z_random))),
        primal_error=primal_error,
    )
    logger.info(
        f"Restricted duals on {sdp.label}: distance {distance:.3e} "
        f"(threshold {threshold:.1e}), multiplicity={report.multiplicity}"
    )
    return report


def dual_multiplicity_demo(
    prob: McProblem, cfg: SolverConfig | None = None, seed: int = 0
) -> MultiplicityReport:
    return compare_restricted_duals(mc_lift(prob), cfg, seed)
