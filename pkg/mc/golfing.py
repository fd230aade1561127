"""
Golfing-scheme dual certificate for matrix completion.

The observation set is the union of k0 independent batches. Phase one runs
one projected correction per batch on W^0 = UV^T; phases two and three keep
correcting with the last batch until the tangent residual vanishes. The
certificate is the sum of the sampled corrections, so it lives on Omega by
construction.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from core.config import GOLFING_C0
from core.errors import CertificateFailure, InvalidInput
from core.linalg import op_norm
from core.rng import make_rng
from execution.pool import run_trials
from mc.problem import (
    McProblem,
    batch_probability,
    mc_generate,
    proj_omega,
    proj_T,
    proj_T_perp,
    sample_batches,
)

logger = logging.getLogger(__name__)

TRUNCATION = 1e-12
GROWTH_LIMIT = 5
MAX_STEPS = 10_000
PERP_BOUND = 5.0 / 8.0
TANGENT_TOL = 1e-6


@dataclass
class GolfingState:
    k0: int
    t0: int
    q_batch: float
    batches: list[NDArray] = field(repr=False)
    W: list[NDArray] = field(default_factory=list, repr=False)
    Z_norms: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    Y1: NDArray | None = field(default=None, repr=False)
    Y2: NDArray | None = field(default=None, repr=False)
    Y3: NDArray | None = field(default=None, repr=False)

    @property
    def contraction_fraction(self) -> float | None:
        """Share of phase-two/three steps with ||Z^t|| <= ||Z^{t-1}|| / 4."""
        if not self.ratios:
            return None
        return float(np.mean(np.asarray(self.ratios) <= 0.25))


@dataclass
class GolfingChecks:
    omega_residual: float
    tangent_residual: float
    perp_norm: float

    @property
    def omega_ok(self) -> bool:
        return self.omega_residual == 0.0

    @property
    def tangent_ok(self) -> bool:
        return self.tangent_residual <= TANGENT_TOL

    @property
    def perp_ok(self) -> bool:
        return self.perp_norm <= PERP_BOUND

    @property
    def passed(self) -> bool:
        return self.omega_ok and self.tangent_ok and self.perp_ok

    def to_dict(self) -> dict:
        return {
            "omega_residual": self.omega_residual,
            "tangent_residual": self.tangent_residual,
            "perp_norm": self.perp_norm,
            "perp_bound": PERP_BOUND,
            "omega_ok": self.omega_ok,
            "tangent_ok": self.tangent_ok,
            "perp_ok": self.perp_ok,
            "passed": self.passed,
        }


@dataclass
class GolfingResult:
    Y: NDArray
    state: GolfingState
    checks: GolfingChecks
    problem: McProblem


def golfing_schedule(prob: McProblem, C0: float = GOLFING_C0) -> tuple[int, int, float]:
    """(k0, t0, q) for a problem."""
    if C0 <= 0:
        raise InvalidInput(f"C0 must be positive, got {C0}")
    k0 = max(1, math.ceil(C0 * math.log(prob.mu * prob.r)))
    t0 = math.ceil(2.0 * math.log(prob.n)) + 2
    return k0, t0, batch_probability(prob.p, k0)


def golfing_certificate(prob: McProblem, C0: float = GOLFING_C0, seed: int = 0) -> GolfingResult:
    """
    Build Y = Y1 + Y2 + Y3 on freshly drawn batches. The returned problem
    carries Omega = union of the batches.
    """
    k0, t0, q = golfing_schedule(prob, C0)
    rng = make_rng(seed)
    batches = sample_batches(rng, prob.n1, prob.n2, q, k0)
    union = np.logical_or.reduce(batches)
    prob = prob.with_mask(union, batches)
    U, V = prob.U, prob.V
    state = GolfingState(k0, t0, q, batches)

    def sampled(mask: NDArray, M: NDArray) -> NDArray:
        return proj_omega(mask, M) / q

    W0 = U @ V.T
    W = W0
    state.W.append(W)
    Y1 = np.zeros_like(W0)
    for t in range(1, k0):
        correction = sampled(batches[t - 1], W)
        Y1 += correction
        W = proj_T(U, V, W - correction)
        state.W.append(W)

    last = batches[k0 - 1]
    floor = TRUNCATION * np.linalg.norm(W0)
    Z = W
    Y2 = np.zeros_like(W0)
    Y3 = np.zeros_like(W0)
    prev_norm = float(np.linalg.norm(Z))
    state.Z_norms.append(prev_norm)
    growth = 0
    t = 0
    while prev_norm > floor:
        t += 1
        if t > MAX_STEPS:
            raise CertificateFailure(
                f"golfing did not reach the truncation level in {MAX_STEPS} steps",
                {"k0": k0, "q": q, "p": prob.p, "last_norm": prev_norm},
            )
        correction = sampled(last, Z)
        if t <= t0:
            Y2 += correction
        else:
            Y3 += correction
        Z = proj_T(U, V, Z - correction)
        norm = float(np.linalg.norm(Z))
        state.ratios.append(norm / prev_norm)
        state.Z_norms.append(norm)
        growth = growth + 1 if norm > prev_norm else 0
        if growth >= GROWTH_LIMIT:
            diagnostics = {
                "k0": k0,
                "t0": t0,
                "q": q,
                "p": prob.p,
                "mu": prob.mu,
                "step": t,
                "ratios": state.ratios[-GROWTH_LIMIT:],
            }
            logger.warning(f"Golfing iterates grew for {GROWTH_LIMIT} steps: {diagnostics}")
            raise CertificateFailure(
                f"golfing iteration is not contracting (grew {GROWTH_LIMIT} steps in a row)",
                diagnostics,
            )
        prev_norm = norm
    logger.debug(f"Golfing truncated after {t} correction steps (k0={k0}, t0={t0}, q={q:.3g})")

    state.Y1, state.Y2, state.Y3 = Y1, Y2, Y3
    Y = Y1 + Y2 + Y3
    checks = GolfingChecks(
        omega_residual=float(np.linalg.norm(proj_omega(union, Y) - Y)),
        tangent_residual=float(np.linalg.norm(proj_T(U, V, Y) - W0)),
        perp_norm=op_norm(proj_T_perp(U, V, Y)),
    )
    logger.info(
        f"Golfing certificate: tangent residual {checks.tangent_residual:.2e}, "
        f"||P_T_perp(Y)|| = {checks.perp_norm:.4f}, passed={checks.passed}"
    )
    return GolfingResult(Y, state, checks, prob)


def golfing_pass_rate(
    n: int, r: int, p: float, count: int, seed: int, C0: float = GOLFING_C0, use_ray: bool = False
) -> dict:
    """Golfing on count fresh problems; failures to contract count as not passed."""

    def trial(s: int) -> dict:
        result = golfing_certificate(mc_generate(n, n, r, p, s), C0, s)
        return {
            **result.checks.to_dict(),
            "k0": result.state.k0,
            "contraction_fraction": result.state.contraction_fraction,
        }

    outcomes = run_trials(trial, count, seed, use_ray=use_ray)
    trials = [
        {"seed": o.seed, **(o.result if o.ok else {"passed": False, "error": o.error})}
        for o in outcomes
    ]
    passed = sum(bool(t["passed"]) for t in trials)
    logger.info(f"Golfing n={n} r={r} p={p:.3g}: {passed}/{count} passed")
    return {"trials": trials, "pass_rate": passed / count if count else 0.0}
