"""
Factorized solver: minimize <C, F F^T> over the constraint manifold.

Riemannian gradient descent with Barzilai-Borwein initial steps and Armijo
backtracking. When the iteration stalls at a first-order point whose Hessian
has a negative eigenvalue, one step along that eigenvector is taken and the
descent resumes, so returned points are second-order stationary up to
tolerance (or reported as not).
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from core.config import BM_MAX_ESCAPES, BM_MAX_ITERS
from core.errors import InvalidInput, NumericalBreakdown
from core.linalg import lambda_min, svec, sym
from core.rng import make_rng
from execution.pool import run_trials
from instances.instance import Instance
from bm.manifolds import BlockStiefel, GroupSpheres, Manifold, UnitRows
from sdp.model import slack

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4
_STEP_MIN, _STEP_MAX = 1e-14, 1e8
_DRIFT_TOL = 1e-9
_DUAL_FEAS_TOL = 1e-8


@dataclass(frozen=True)
class BmConfig:
    max_iters: int = BM_MAX_ITERS
    max_escapes: int = BM_MAX_ESCAPES
    tol_g: float | None = None
    tol_h: float | None = None

    def __post_init__(self):
        if self.max_iters < 1 or self.max_escapes < 0:
            raise InvalidInput("iteration and escape caps must be nonnegative")
        for tol in (self.tol_g, self.tol_h):
            if tol is not None and tol <= 0:
                raise InvalidInput("BM tolerances must be positive")

    def tolerances(self, C: NDArray) -> tuple[float, float]:
        scale = 1.0 + float(np.linalg.norm(C))
        tol_g = self.tol_g if self.tol_g is not None else 1e-8 * scale
        tol_h = self.tol_h if self.tol_h is not None else 1e-6 * scale
        return tol_g, tol_h


@dataclass(eq=False)
class BmResult:
    F: NDArray
    objective: float
    grad_norm: float
    hess_min_eig: float
    sosp: bool
    iterations: int
    escapes: int
    seed: int | None = None
    manifold: str = ""
    gap_to_dual: float | None = None
    multiplier_y: NDArray | None = field(default=None, repr=False)


class SospCheck(NamedTuple):
    grad_norm: float
    hess_min_eig: float
    sosp: bool


def manifold_for(instance: Instance, r: int) -> Manifold:
    family = instance.params.get("family", instance.family)
    n = instance.sdp.n
    if family in ("maxcut", "z2sync", "sbm", "sbm-rescaled"):
        return UnitRows(n, r)
    if family == "product":
        return GroupSpheres(instance.params["partition"], r)
    if family == "ocut":
        return BlockStiefel(instance.params["S"], instance.params["d"], r)
    raise InvalidInput(f"no factorized manifold for instance family {family!r}")


def objective(C: NDArray, F: NDArray) -> float:
    return float(np.sum(F * (C @ F)))


def riemannian_gradient(manifold: Manifold, C: NDArray, F: NDArray) -> NDArray:
    return manifold.project(F, 2.0 * (C @ F))


def hessian_matrix(manifold: Manifold, C: NDArray, F: NDArray) -> tuple[NDArray, NDArray]:
    """Riemannian Hessian on an orthonormal tangent basis, and that basis."""
    basis = manifold.tangent_basis(F)
    S = C - manifold.multipliers(F, C @ F)
    n, r = manifold.shape
    B = basis.reshape(n, r, -1)
    SB = np.einsum("ij,jrk->irk", S, B)
    H = 2.0 * np.einsum("irk,irl->kl", B, SB)
    return sym(H), basis


def _min_curvature(manifold: Manifold, C: NDArray, F: NDArray) -> tuple[float, NDArray | None]:
    H, basis = hessian_matrix(manifold, C, F)
    if H.shape[0] == 0:
        return 0.0, None
    values, vectors = scipy.linalg.eigh(H, subset_by_index=[0, 0])
    direction = (basis @ vectors[:, 0]).reshape(manifold.shape)
    return float(values[0]), direction


def check_sosp(
    instance: Instance, F: NDArray, tol_g: float | None = None, tol_h: float | None = None
) -> SospCheck:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] != instance.sdp.n:
        raise InvalidInput(f"factor must have {instance.sdp.n} rows, got shape {F.shape}")
    manifold = manifold_for(instance, F.shape[1])
    if not manifold.contains(F):
        raise InvalidInput(f"factor is off the manifold (violation {manifold.violation(F):.2e})")
    C = instance.sdp.C
    default_g, default_h = BmConfig(tol_g=tol_g, tol_h=tol_h).tolerances(C)
    grad_norm = float(np.linalg.norm(riemannian_gradient(manifold, C, F)))
    hess_min, _ = _min_curvature(manifold, C, F)
    return SospCheck(grad_norm, hess_min, grad_norm <= default_g and hess_min >= -default_h)


def _retract_checked(manifold: Manifold, Y: NDArray) -> NDArray:
    F = manifold.retract(Y)
    drift = manifold.violation(F)
    if drift > _DRIFT_TOL:
        raise NumericalBreakdown(f"retraction left the manifold (violation {drift:.2e})")
    return F


def _escape(manifold: Manifold, C: NDArray, F: NDArray, f: float, curvature: float, D: NDArray):
    """Backtrack along the negative-curvature direction D until f decreases."""
    if np.vdot(riemannian_gradient(manifold, C, F), D) > 0:
        D = -D
    step = 1.0
    for _ in range(40):
        candidate = _retract_checked(manifold, F + step * D)
        f_new = objective(C, candidate)
        if f_new <= f - 0.25 * step**2 * abs(curvature):
            return candidate, f_new
        step /= 2.0
    return None, f


def bm_solve(
    instance: Instance,
    r: int,
    F0: NDArray | None = None,
    seed: int | None = None,
    cfg: BmConfig | None = None,
) -> BmResult:
    cfg = cfg or BmConfig()
    manifold = manifold_for(instance, r)
    C = instance.sdp.C
    tol_g, tol_h = cfg.tolerances(C)

    if F0 is None:
        if seed is None:
            raise InvalidInput("either a starting factor or a seed is required")
        F = manifold.random_point(make_rng(seed))
    else:
        F = np.array(F0, dtype=np.float64)
        if not manifold.contains(F):
            raise InvalidInput("starting factor is off the manifold")

    f = objective(C, F)
    g = riemannian_gradient(manifold, C, F)
    g_norm = float(np.linalg.norm(g))
    step = 1.0 / (1.0 + 2.0 * float(np.linalg.norm(C, 2)))
    prev = None
    escapes = 0
    hess_min = None
    it = 0

    while it < cfg.max_iters:
        stalled = False
        if g_norm <= tol_g:
            stalled = True
        else:
            if prev is not None:
                s, dg = F - prev[0], g - prev[1]
                sy = abs(float(np.vdot(s, dg)))
                if sy > 0:
                    step = float(np.clip(np.vdot(s, s) / sy, _STEP_MIN, _STEP_MAX))
            accepted = False
            t = step
            while t >= _STEP_MIN:
                candidate = _retract_checked(manifold, F - t * g)
                f_new = objective(C, candidate)
                if f_new <= f - _ARMIJO * t * g_norm**2:
                    accepted = True
                    break
                t /= 2.0
            it += 1
            if accepted:
                prev = (F, g)
                F, f = candidate, f_new
                g = riemannian_gradient(manifold, C, F)
                g_norm = float(np.linalg.norm(g))
                step = t
            else:
                stalled = True

        if not stalled:
            continue

        hess_min, D = _min_curvature(manifold, C, F)
        if hess_min >= -tol_h or escapes >= cfg.max_escapes or D is None:
            break
        moved, f_new = _escape(manifold, C, F, f, hess_min, D)
        if moved is None:
            break
        escapes += 1
        logger.debug(f"Escape {escapes}: curvature {hess_min:.3e}, f {f:.8g} -> {f_new:.8g}")
        F, f, prev = moved, f_new, None
        g = riemannian_gradient(manifold, C, F)
        g_norm = float(np.linalg.norm(g))
        hess_min = None

    if hess_min is None:
        hess_min, _ = _min_curvature(manifold, C, F)
    sosp = g_norm <= tol_g and hess_min >= -tol_h
    if not sosp:
        logger.warning(
            f"BM on {instance.label} (r={r}, seed={seed}) stopped short of an SOSP: "
            f"grad {g_norm:.2e}, min curvature {hess_min:.2e}"
        )
    return BmResult(
        F=F,
        objective=f,
        grad_norm=g_norm,
        hess_min_eig=hess_min,
        sosp=sosp,
        iterations=it,
        escapes=escapes,
        seed=seed,
        manifold=manifold.kind,
        multiplier_y=multiplier_dual(instance, manifold, F),
    )


def multiplier_dual(instance: Instance, manifold: Manifold, F: NDArray) -> NDArray:
    """The y with A*(y) = Lambda(F), the multipliers read off at F."""
    sdp = instance.sdp
    L = manifold.multipliers(F, sdp.C @ F)
    return scipy.linalg.solve(sdp.gram, np.asarray(sdp.A @ svec(L)).ravel(), assume_a="pos")


def gap_to_dual(instance: Instance, F: NDArray, y: NDArray) -> float:
    """f(F) - b^T y for a dual-feasible y; positive means F is not optimal."""
    Z = slack(instance.sdp, y)
    lam = lambda_min(Z)
    if lam < -_DUAL_FEAS_TOL:
        raise InvalidInput(f"y is not dual feasible: lambda_min(Z(y)) = {lam:.3e}")
    return objective(instance.sdp.C, np.asarray(F, dtype=np.float64)) - float(instance.sdp.b @ y)


def feasible_dual(instance: Instance, y: NDArray) -> NDArray:
    """
    Shift y along -b until Z(y) is PSD. For the block-diagonal families
    A*(b) = I, so the shift adds t I to the slack.
    """
    sdp = instance.sdp
    if np.linalg.norm(slack(sdp, sdp.b) - (sdp.C - np.eye(sdp.n))) > 1e-12 * (1 + sdp.n):
        raise InvalidInput(f"A*(b) is not the identity for {instance.label}")
    t = max(0.0, -lambda_min(slack(sdp, y)))
    return np.asarray(y, dtype=np.float64) - t * sdp.b


def bm_thresholds(kind: str, n: int, m: int, r: int, d: int = 1) -> dict:
    """
    Rank regimes: for almost every cost, every SOSP is optimal once
    r(r+1)/2 > m; below the failure bound there are simple instances on which
    the factorized problem has spurious SOSPs.
    """
    rr = r * (r + 1) // 2
    if kind == "unit-rows":
        failure = rr + r <= n
    elif kind == "group-spheres":
        failure = rr + r <= m
    elif kind == "block-stiefel":
        failure = rr + r * d <= m
    else:
        raise InvalidInput(f"unknown manifold kind {kind!r}")
    return {"kind": kind, "n": n, "m": m, "r": r, "d": d, "benign": rr > m, "failure_possible": failure}


@dataclass
class BmMultistart:
    results: list[BmResult]
    errors: dict[int, str]
    dual_bound: float | None
    failure_witnesses: list[int]
    thresholds: dict


def bm_multistart(
    instance: Instance,
    r: int,
    starts: int,
    seed: int,
    cfg: BmConfig | None = None,
    use_ray: bool = False,
) -> BmMultistart:
    """
    Independent starts at seeds seed..seed+starts-1, merged by seed. The dual
    bound is the best feasible dual among the starts' multipliers and the
    instance's closed-form certificate; an SOSP above that bound is a failure
    witness.
    """
    manifold = manifold_for(instance, r)
    outcomes = run_trials(lambda s: bm_solve(instance, r, seed=s, cfg=cfg), starts, seed, use_ray=use_ray)
    results = [o.result for o in outcomes if o.ok]
    errors = {o.seed: o.error for o in outcomes if not o.ok}

    candidates = [res.multiplier_y for res in results if res.multiplier_y is not None]
    if instance.truth is not None and instance.truth.y_star is not None:
        candidates.append(instance.truth.y_star)
    bound, best_y = None, None
    for y in candidates:
        y = feasible_dual(instance, y)
        value = float(instance.sdp.b @ y)
        if bound is None or value > bound:
            bound, best_y = value, y

    witnesses = []
    for res in results:
        if best_y is not None:
            res.gap_to_dual = gap_to_dual(instance, res.F, best_y)
            if res.sosp and res.gap_to_dual > 1e-5 * (1 + abs(bound)):
                witnesses.append(res.seed)
    if witnesses:
        logger.warning(f"Spurious SOSPs on {instance.label} at seeds {witnesses}")

    sdp = instance.sdp
    thresholds = bm_thresholds(manifold.kind, sdp.n, sdp.m, r, getattr(manifold, "d", 1))
    logger.info(
        f"BM multistart on {instance.label}: {len(results)}/{starts} finished, "
        f"dual bound {bound}, {len(witnesses)} failure witnesses"
    )
    return BmMultistart(results, errors, bound, witnesses, thresholds)
