"""
Empirical sensitivity and error-bound probes around a solved instance.

Neither probe proves anything. They measure how far the solution moves under
random data perturbations, and how the distance to the solution compares with
the residual sum ||A(X) - b|| + (-lambda_min(X))_+ + (<C, X> - p*)_+.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from core.linalg import eig_sym, lambda_min, rank_eps
from core.rng import gaussian, gaussian_symmetric, make_rng
from execution.pool import run_trials
from sdp.model import SolverSolution, StandardFormSDP, apply_A
from sdp.solver import SolverConfig, solve

logger = logging.getLogger(__name__)


@dataclass
class SensitivityRow:
    delta: float
    median_distance: float | None
    distances: list[float]
    failures: list[str] = field(default_factory=list)


@dataclass
class SensitivityTable:
    rows: list[SensitivityRow]
    exponent: float | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ErrorBoundRow:
    delta: float
    distance: float
    primal_infeas: float
    cone_infeas: float
    suboptimality: float
    residual_sum: float


@dataclass
class ErrorBoundTable:
    direction: str
    rows: list[ErrorBoundRow]
    gamma_1: float | None
    gamma_2: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _unit_symmetric(rng: np.random.Generator, n: int) -> NDArray:
    D = gaussian_symmetric(rng, n)
    return D / np.linalg.norm(D)


def _unit_vector(rng: np.random.Generator, m: int) -> NDArray:
    v = gaussian(rng, m)
    return v / np.linalg.norm(v)


def perturbed(sdp: StandardFormSDP, delta: float, seed: int) -> StandardFormSDP:
    """(C, b) moved by random directions of norm delta/sqrt(2) each."""
    rng = make_rng(seed)
    step = delta / np.sqrt(2.0)
    C = sdp.C + step * _unit_symmetric(rng, sdp.n)
    b = sdp.b + step * _unit_vector(rng, sdp.m)
    return StandardFormSDP(C, sdp.A, b, label=f"{sdp.label}:delta={delta:g}")


def fit_exponent(deltas: NDArray, distances: NDArray) -> float | None:
    """Slope of log(distance) against log(delta) over the positive pairs."""
    mask = (deltas > 0) & (distances > 0)
    if np.count_nonzero(mask) < 2:
        return None
    slope, _ = np.polyfit(np.log(deltas[mask]), np.log(distances[mask]), 1)
    return float(slope)


def sensitivity_probe(
    sdp: StandardFormSDP,
    sol: SolverSolution,
    magnitudes: list[float],
    seed: int,
    repeats: int = 5,
    cfg: SolverConfig | None = None,
    use_ray: bool = False,
) -> SensitivityTable:
    """
    Re-solve under `repeats` random perturbations per magnitude and record
    ||X' - X*||_F. Failed re-solves are kept as row entries.
    """
    if not sol.converged:
        logger.warning("Sensitivity probe started from a solution that did not converge")
    magnitudes = [float(d) for d in magnitudes]

    def trial(trial_seed: int) -> float:
        delta = magnitudes[(trial_seed - seed) // repeats]
        moved = perturbed(sdp, delta, trial_seed)
        return float(np.linalg.norm(solve(moved, cfg).X - sol.X))

    outcomes = run_trials(trial, len(magnitudes) * repeats, seed, use_ray=use_ray)

    rows = []
    for i, delta in enumerate(magnitudes):
        batch = outcomes[i * repeats : (i + 1) * repeats]
        distances = [o.result for o in batch if o.ok]
        rows.append(
            SensitivityRow(
                delta=delta,
                median_distance=float(np.median(distances)) if distances else None,
                distances=distances,
                failures=[o.error for o in batch if not o.ok],
            )
        )
        logger.debug(f"delta={delta:g}: median distance {rows[-1].median_distance}")

    usable = [r for r in rows if r.median_distance is not None]
    exponent = fit_exponent(
        np.array([r.delta for r in usable]), np.array([r.median_distance for r in usable])
    )
    logger.info(f"Sensitivity probe on {sdp.label or 'sdp'}: fitted exponent {exponent}")
    return SensitivityTable(rows, exponent)


def _direction(
    sdp: StandardFormSDP, sol: SolverSolution, rng: np.random.Generator, kind: str
) -> NDArray:
    if kind == "random":
        return _unit_symmetric(rng, sdp.n)
    # face: V1 S V1^T with S PSD, so X* + delta*D stays PSD
    dec = eig_sym(sol.X)
    r = max(rank_eps(dec.values).rank, 1)
    V1 = dec.vectors[:, :r]
    G = gaussian(rng, (r, r))
    D = V1 @ (G @ G.T) @ V1.T
    return D / np.linalg.norm(D)


def error_bound_probe(
    sdp: StandardFormSDP,
    sol: SolverSolution,
    magnitudes: list[float],
    seed: int,
    direction: Literal["random", "face"] = "random",
) -> ErrorBoundTable:
    """
    Sample X = X* + delta*D along one unit direction D and compare ||X - X*||_F
    with the residual sum. gamma_rho is the largest distance**rho / residual_sum
    seen over the nonzero magnitudes.
    """
    if direction not in ("random", "face"):
        raise ValueError(f"unknown direction {direction!r}")
    rng = make_rng(seed)
    D = _direction(sdp, sol, rng, direction)
    p_star = sol.primal_obj

    rows = []
    for delta in magnitudes:
        X = sol.X + float(delta) * D
        primal = float(np.linalg.norm(apply_A(sdp, X) - sdp.b))
        cone = max(-lambda_min(X), 0.0)
        subopt = float(np.vdot(sdp.C, X)) - p_star
        rows.append(
            ErrorBoundRow(
                delta=float(delta),
                distance=float(np.linalg.norm(X - sol.X)),
                primal_infeas=primal,
                cone_infeas=cone,
                suboptimality=subopt,
                residual_sum=primal + cone + max(subopt, 0.0),
            )
        )

    def gamma(rho: int) -> float | None:
        ratios = [r.distance**rho / r.residual_sum for r in rows if r.delta > 0 and r.residual_sum > 0]
        return max(ratios) if ratios else None

    table = ErrorBoundTable(direction, rows, gamma(1), gamma(2))
    logger.info(
        f"Error-bound probe on {sdp.label or 'sdp'} ({direction}): "
        f"gamma_1={table.gamma_1} gamma_2={table.gamma_2}"
    )
    return table
