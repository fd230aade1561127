"""
First-order splitting solver for standard-form SDPs.

Alternating-direction augmented Lagrangian on the dual problem: the y-update
is a linear solve with the cached Cholesky factor of A A^T, the slack update
is one projection onto the PSD cone, and the primal matrix is the multiplier
of the dual equality constraint (the negative part of that same projection).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numpy.typing import NDArray

from core.config import (
    RANK_EPS,
    SOLVER_ALPHA,
    SOLVER_MAX_ITERS,
    SOLVER_RHO,
    SOLVER_TOL_FEAS,
    SOLVER_TOL_GAP,
)
from core.errors import Infeasible, InvalidInput, NumericalBreakdown, Unbounded
from core.linalg import (
    SymMatrix,
    as_sym,
    eig_sym,
    independent_rows,
    lambda_min,
    psd_split,
    rank_eps,
    smat,
    svec,
    svec_dim,
    svec_layout,
    sym,
)
from sdp.model import (
    SolverSolution,
    SolveStatus,
    StandardFormSDP,
    check_surjective,
    congruence_rows,
    product_columns,
    residuals,
    slack,
)

logger = logging.getLogger(__name__)

# polishing least-squares systems above this flop count are skipped
_POLISH_FLOPS = 2e10

_RHO_MIN, _RHO_MAX = 1e-4, 1e4
_RAY_NORM = 1e6
_RAY_TOL = 1e-5


@dataclass(frozen=True)
class SolverConfig:
    tol_feas: float = SOLVER_TOL_FEAS
    tol_gap: float = SOLVER_TOL_GAP
    max_iters: int = SOLVER_MAX_ITERS
    alpha: float = SOLVER_ALPHA
    rho: float = SOLVER_RHO
    rescale: bool = True
    polish: bool = True
    eps_rank: float = RANK_EPS
    obj_floor: float = -1e12
    check_every: int = 10

    def __post_init__(self):
        if self.tol_feas <= 0 or self.tol_gap <= 0:
            raise InvalidInput("solver tolerances must be positive")
        if not 0 < self.alpha < 2:
            raise InvalidInput(f"over-relaxation must lie in (0, 2), got {self.alpha}")
        if self.rho <= 0:
            raise InvalidInput(f"penalty must be positive, got {self.rho}")
        if self.max_iters < 1 or self.check_every < 1:
            raise InvalidInput("iteration counts must be positive")


@dataclass(frozen=True)
class _ScaledData:
    A: sp.csr_matrix | NDArray
    b: NDArray
    C: NDArray
    row: NDArray
    c_scale: float
    b_scale: float

    def primal(self, X: NDArray) -> NDArray:
        return self.b_scale * X

    def dual(self, y: NDArray) -> NDArray:
        return self.c_scale * self.row * y


def _scale(sdp: StandardFormSDP, enabled: bool) -> _ScaledData:
    norms = np.sqrt(np.diag(sdp.gram))
    if np.any(norms == 0):
        raise InvalidInput(f"constraint {int(np.argmin(norms))} is the zero matrix")
    row = 1.0 / norms if enabled else np.ones(sdp.m)
    A = sp.diags(row) @ sdp.A if sp.issparse(sdp.A) else row[:, None] * sdp.A
    b = row * sdp.b
    c_scale = max(1.0, float(np.linalg.norm(sdp.C))) if enabled else 1.0
    b_scale = max(1.0, float(np.linalg.norm(b))) if enabled else 1.0
    return _ScaledData(A, b / b_scale, sdp.C / c_scale, row, c_scale, b_scale)


def _factor_gram(sdp: StandardFormSDP, data: _ScaledData):
    G = data.row[:, None] * sdp.gram * data.row[None, :]
    try:
        factor = scipy.linalg.cho_factor(G, lower=False, check_finite=False)
        pivots = np.abs(np.diag(factor[0]))
        if pivots.min() ** 2 > 1e-14 * pivots.max() ** 2:
            return factor
    except np.linalg.LinAlgError:
        pass

    # singular Gram matrix: decide whether the linear system A(X) = b is consistent
    check = check_surjective(sdp)
    G_raw = sdp.gram
    w = scipy.linalg.lstsq(G_raw, sdp.b)[0]
    mismatch = np.linalg.norm(G_raw @ w - sdp.b)
    if mismatch > 1e-8 * max(1.0, float(np.linalg.norm(sdp.b))):
        raise Infeasible(
            f"linear constraints are inconsistent (least-squares mismatch {mismatch:.3e})"
        )
    if not check.surjective:
        raise InvalidInput(
            f"constraint matrices are linearly dependent (sigma_min={check.sigma_min:.3e})"
        )
    raise NumericalBreakdown("Cholesky factorization of the constraint Gram matrix failed")


def _detect_rays(data: _ScaledData, X: NDArray, y: NDArray, pres: float, cfg: SolverConfig):
    """Normalized residual divergence tests; heuristic, not certificates."""
    y_norm = float(np.linalg.norm(y))
    if y_norm > _RAY_NORM and pres > 100 * cfg.tol_feas:
        y_dir = y / y_norm
        adj = smat(np.asarray(data.A.T @ y_dir).ravel(), X.shape[0])
        if data.b @ y_dir > _RAY_TOL and -lambda_min(-adj) <= _RAY_TOL:
            raise Infeasible(
                f"dual iterates diverge along an improving ray (|y|={y_norm:.2e}, "
                f"primal residual {pres:.2e})"
            )
    x_norm = float(np.linalg.norm(X))
    if x_norm > _RAY_NORM:
        x_dir = X / x_norm
        if (
            np.linalg.norm(data.A @ svec(x_dir)) <= _RAY_TOL
            and np.vdot(data.C, x_dir) < -_RAY_TOL
        ):
            raise Unbounded(f"primal iterates diverge along a descent ray (|X|={x_norm:.2e})")


def solve(sdp: StandardFormSDP, cfg: SolverConfig | None = None) -> SolverSolution:
    """Solve (P)/(D) to the tolerances in cfg."""
    cfg = cfg or SolverConfig()
    n = sdp.n
    data = _scale(sdp, cfg.rescale)
    factor = _factor_gram(sdp, data)
    A, b, C = data.A, data.b, data.C
    c_vec = svec(C)
    b_norm = float(np.linalg.norm(b))
    C_norm = float(np.linalg.norm(C))

    X = np.zeros((n, n))
    Z = np.zeros((n, n))
    X_out = X
    y = np.zeros(sdp.m)
    rho = cfg.rho
    best: tuple[float, NDArray, NDArray] | None = None
    status = SolveStatus.MAX_ITERATIONS
    iteration = 0

    logger.debug(f"Solving {sdp.label or 'sdp'} (n={n}, m={sdp.m})")
    for iteration in range(1, cfg.max_iters + 1):
        rhs = rho * (b - A @ svec(X)) - A @ (svec(Z) - c_vec)
        y = scipy.linalg.cho_solve(factor, np.asarray(rhs).ravel(), check_finite=False)
        adj = smat(np.asarray(A.T @ y).ravel(), n)
        Z, X_neg = psd_split(C - adj - rho * X)
        X_out = X_neg / rho
        X = (1.0 - cfg.alpha) * X + cfg.alpha * X_out

        if iteration % cfg.check_every and iteration != cfg.max_iters:
            continue

        pres = float(np.linalg.norm(A @ svec(X_out) - b)) / (1.0 + b_norm)
        dres = float(np.linalg.norm(adj + Z - C)) / (1.0 + C_norm)
        p = float(np.vdot(C, X_out))
        d = float(b @ y)
        gap = abs(p - d) / (1.0 + abs(p) + abs(d))
        if not np.isfinite(pres + dres + gap):
            raise NumericalBreakdown(f"non-finite residuals at iteration {iteration}")

        score = max(pres, dres, gap)
        if best is None or score < best[0]:
            best = (score, X_out.copy(), y.copy())
        if pres <= cfg.tol_feas and dres <= cfg.tol_feas and gap <= cfg.tol_gap:
            status = SolveStatus.CONVERGED
            break

        if data.c_scale * data.b_scale * p < cfg.obj_floor:
            raise Unbounded(f"primal objective fell below {cfg.obj_floor:.3e}")
        _detect_rays(data, X_out, y, pres, cfg)

        if pres > 5.0 * dres:
            rho = min(rho * 1.5, _RHO_MAX)
        elif dres > 5.0 * pres:
            rho = max(rho / 1.5, _RHO_MIN)

        if iteration % (100 * cfg.check_every) == 0:
            logger.debug(
                f"iter {iteration}: pres={pres:.2e} dres={dres:.2e} gap={gap:.2e} rho={rho:.2e}"
            )

    if status == SolveStatus.CONVERGED:
        X_best, y_best = X_out, y
    else:
        assert best is not None
        _, X_best, y_best = best
        logger.warning(
            f"Solver stopped after {iteration} iterations without converging "
            f"(best scaled residual {best[0]:.3e})"
        )

    X_final = sym(data.primal(X_best))
    y_final = data.dual(y_best)
    if cfg.polish and status == SolveStatus.CONVERGED:
        X_final, y_final = polish(sdp, X_final, y_final, cfg.eps_rank)

    solution = SolverSolution(sdp, X_final, y_final, status, iteration)
    logger.info(
        f"Solve {status.value} after {iteration} iterations: "
        f"p={solution.primal_obj:.8g} d={solution.dual_obj:.8g} "
        f"worst residual {solution.residuals.worst():.2e}"
    )
    return solution


def _affordable(rows: int, cols: int) -> bool:
    return float(rows) * cols * min(rows, cols) <= _POLISH_FLOPS


def polish(
    sdp: StandardFormSDP, X: NDArray, y: NDArray, eps: float = RANK_EPS
) -> tuple[SymMatrix, NDArray]:
    """
    Refit X on the face spanned by its eigenvectors above eps and refit y so
    that Z(y) annihilates that face; keeps whichever combination has the
    smallest worst residual.
    """
    dec = eig_sym(X)
    r = rank_eps(dec.values, eps).rank
    if r == 0:
        return X, y
    V1 = dec.vectors[:, :r]

    X_fit = None
    if _affordable(sdp.m, svec_dim(r)):
        M = congruence_rows(sdp, V1)
        s0 = svec(V1.T @ X @ V1)
        delta = scipy.linalg.lstsq(M, sdp.b - M @ s0)[0]
        S, _ = psd_split(smat(s0 + delta, r))
        X_fit = sym(V1 @ S @ V1.T)

    y_fit = None
    if r < sdp.n and _affordable(sdp.n * r, sdp.m):
        K = product_columns(sdp, V1)
        target = (slack(sdp, y) @ V1).ravel()
        y_fit = y + scipy.linalg.lstsq(K, target)[0]

    candidates = [(X, y)]
    if X_fit is not None:
        candidates.append((X_fit, y))
    if y_fit is not None:
        candidates.append((X, y_fit))
        if X_fit is not None:
            candidates.append((X_fit, y_fit))
    scores = [residuals(sdp, Xc, yc).worst() for Xc, yc in candidates]
    pick = int(np.argmin(scores))
    logger.debug(f"Polish kept candidate {pick} (worst residual {scores[0]:.2e} -> {scores[pick]:.2e})")
    return candidates[pick]


def _pinned_rows(U: NDArray, a: NDArray, c: NDArray) -> NDArray:
    """Row t is svec(sym(u_a u_c^T)), so <row, svec(S)> = (U S U^T)[a_t, c_t]."""
    rows, cols, scale = svec_layout(U.shape[1])
    Ua, Uc = U[a], U[c]
    return (Ua[:, rows] * Uc[:, cols] + Uc[:, rows] * Ua[:, cols]) * (scale / 2.0)


def solve_restricted(
    sdp: StandardFormSDP, U: NDArray, C_s: NDArray, cfg: SolverConfig | None = None
) -> SymMatrix:
    """
    maximize <C_s, Z_s>  s.t.  Z_s PSD,  U Z_s U^T = C - A*(y) for some y.

    When every constraint of sdp occupies its own single entry pair, the
    entries of U Z_s U^T outside that free pattern are pinned to C. Otherwise
    the affine condition is imposed through a basis of the null space of the
    constraint map. Redundant rows are dropped before solving.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != sdp.n or U.shape[1] < 1:
        raise InvalidInput(f"subspace basis must be {sdp.n} x k, got shape {U.shape}")
    k = U.shape[1]
    if np.linalg.norm(U.T @ U - np.eye(k)) > 1e-8:
        raise InvalidInput("subspace basis must have orthonormal columns")
    C_s = as_sym(C_s, "restricted objective")
    if C_s.shape != (k, k):
        raise InvalidInput(f"restricted objective must be {k}x{k}")

    pattern = sdp.coordinate_pattern()
    if pattern is not None:
        free = np.zeros((sdp.n, sdp.n), dtype=bool)
        for i, j in pattern:
            free[i, j] = free[j, i] = True
        a, c = np.triu_indices(sdp.n)
        pinned = ~free[a, c]
        a, c = a[pinned], c[pinned]
        rows = _pinned_rows(U, a, c)
        rhs = sdp.C[a, c]
    else:
        dense = sdp.A.toarray() if sp.issparse(sdp.A) else sdp.A
        null = scipy.linalg.null_space(dense)
        lift = np.column_stack(
            [svec(U @ smat(e, k) @ U.T) for e in np.eye(svec_dim(k))]
        )
        rows = null.T @ lift
        rhs = null.T @ svec(sdp.C)

    keep = independent_rows(rows)
    if keep.size == 0:
        raise InvalidInput("no constraint pins the restricted problem")
    reduced = StandardFormSDP(-C_s, rows[keep], rhs[keep], label=f"{sdp.label}:restricted")
    logger.info(
        f"Restricted problem: k={k}, {keep.size} of {rows.shape[0]} pinned rows independent"
    )
    sol = solve(reduced, cfg)
    if not sol.converged:
        raise NumericalBreakdown(
            f"restricted problem stopped at {sol.status.value} after {sol.iterations} iterations"
        )
    return sol.X
