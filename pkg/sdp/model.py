"""
The standard-form primal/dual pair

    (P)  minimize <C, X>   s.t.  A(X) = b,  X PSD
    (D)  maximize b^T y    s.t.  Z(y) = C - A*(y) PSD

The constraint map is stored as one m x n(n+1)/2 matrix whose k-th row is
svec(A_k). Its coordinate form is exactly the list of upper-triangle triplets
(k, i, j, A_k[i, j]) up to the sqrt(2) svec scaling, so A(H) = A @ svec(H) and
A*(y) = smat(A^T y) are exact adjoints of each other.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from numpy.typing import NDArray

from core.config import SURJECTIVE_TOL
from core.errors import InvalidInput
from core.linalg import (
    SQRT2,
    SymMatrix,
    as_sym,
    lambda_min,
    smat,
    svec,
    svec_dim,
    svec_index,
    svec_layout,
)

logger = logging.getLogger(__name__)

Triplet = tuple[int, int, int, float]

# dense SVD is used for the surjectivity test below this many matrix entries
_DENSE_SVD_LIMIT = 20_000_000


@dataclass(frozen=True, eq=False)
class StandardFormSDP:
    C: SymMatrix
    A: sp.csr_matrix | NDArray
    b: NDArray
    label: str = ""

    def __post_init__(self):
        C = as_sym(self.C, "cost matrix C")
        n = C.shape[0]
        A = self.A if sp.issparse(self.A) else np.asarray(self.A, dtype=np.float64)
        if sp.issparse(A):
            A = sp.csr_matrix(A, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64).ravel()
        if A.ndim != 2 or A.shape[1] != svec_dim(n):
            raise InvalidInput(
                f"constraint matrix has shape {A.shape}, expected (m, {svec_dim(n)})"
            )
        if A.shape[0] < 1:
            raise InvalidInput("at least one constraint is required")
        if b.shape[0] != A.shape[0]:
            raise InvalidInput(f"b has length {b.shape[0]}, expected {A.shape[0]}")
        if not np.all(np.isfinite(b)):
            raise InvalidInput("b has non-finite entries")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_triplets(
        cls, C, triplets: Iterable[Triplet], b, m: int | None = None, label: str = ""
    ) -> "StandardFormSDP":
        """
        Build from (k, i, j, v) entries, meaning A_k[i, j] = A_k[j, i] = v.
        Lower-triangle entries are mirrored; repeated entries are summed.
        """
        C = as_sym(C, "cost matrix C")
        n = C.shape[0]
        b = np.asarray(b, dtype=np.float64).ravel()
        m = len(b) if m is None else m
        data = np.asarray(list(triplets), dtype=np.float64).reshape(-1, 4)
        k = data[:, 0].astype(np.int64)
        i = data[:, 1].astype(np.int64)
        j = data[:, 2].astype(np.int64)
        v = data[:, 3]
        if data.size and (k.min() < 0 or k.max() >= m):
            raise InvalidInput("constraint index out of range")
        if data.size and (min(i.min(), j.min()) < 0 or max(i.max(), j.max()) >= n):
            raise InvalidInput("matrix index out of range")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        cols = svec_index(n, lo, hi)
        vals = np.where(lo == hi, v, SQRT2 * v)
        A = sp.csr_matrix((vals, (k, cols)), shape=(m, svec_dim(n)))
        A.sum_duplicates()
        return cls(C, A, b, label)

    @classmethod
    def from_dense(cls, C, constraints: Iterable[NDArray], b, label: str = "") -> "StandardFormSDP":
        rows = [svec(as_sym(Ak, "constraint matrix")) for Ak in constraints]
        return cls(C, sp.csr_matrix(np.vstack(rows)), b, label)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @cached_property
    def gram(self) -> NDArray:
        """A A^T as a dense m x m matrix."""
        G = self.A @ self.A.T
        return G.toarray() if sp.issparse(G) else np.asarray(G)

    @cached_property
    def constraint_list(self) -> list[sp.csr_matrix]:
        """Each A_k as a sparse n x n matrix."""
        rows, cols, scale = svec_layout(self.n)
        A = sp.csr_matrix(self.A)
        mats = []
        for k in range(self.m):
            start, stop = A.indptr[k], A.indptr[k + 1]
            idx = A.indices[start:stop]
            vals = A.data[start:stop] / scale[idx]
            r, c = rows[idx], cols[idx]
            off = r != c
            mats.append(
                sp.csr_matrix(
                    (
                        np.concatenate([vals, vals[off]]),
                        (np.concatenate([r, c[off]]), np.concatenate([c, r[off]])),
                    ),
                    shape=(self.n, self.n),
                )
            )
        return mats

    def constraint(self, k: int) -> SymMatrix:
        return self.constraint_list[k].toarray()

    def triplets(self) -> Iterator[Triplet]:
        """Upper-triangle (k, i, j, v) entries, ordered by k then svec position."""
        rows, cols, scale = svec_layout(self.n)
        A = sp.csr_matrix(self.A, copy=True)
        A.sort_indices()
        for k in range(self.m):
            for pos in range(A.indptr[k], A.indptr[k + 1]):
                idx = A.indices[pos]
                value = A.data[pos] / scale[idx]
                if value != 0.0:
                    yield k, int(rows[idx]), int(cols[idx]), float(value)

    def scaled(self, factors: NDArray | float) -> "StandardFormSDP":
        """Same problem with rows rescaled, (A_k, b_k) -> (c_k A_k, c_k b_k)."""
        c = np.broadcast_to(np.asarray(factors, dtype=np.float64), (self.m,))
        D = sp.diags(c)
        A = D @ self.A if sp.issparse(self.A) else c[:, None] * self.A
        return StandardFormSDP(self.C, A, c * self.b, self.label)

    def coordinate_pattern(self) -> list[tuple[int, int]] | None:
        """
        The (i, j) position of every constraint when each A_k touches a single
        symmetric pair of entries and no two constraints share one; else None.
        """
        rows, cols, _ = svec_layout(self.n)
        A = sp.csr_matrix(self.A)
        if np.any(np.diff(A.indptr) != 1):
            return None
        idx = A.indices
        if len(np.unique(idx)) != len(idx):
            return None
        return [(int(rows[t]), int(cols[t])) for t in idx]


class Residuals(NamedTuple):
    primal_infeas: float
    dual_infeas: float
    cone_infeas: float
    gap: float
    primal_obj: float
    dual_obj: float

    def worst(self) -> float:
        return max(self.primal_infeas, self.dual_infeas, self.cone_infeas, self.gap)


class SurjectivityCheck(NamedTuple):
    surjective: bool
    sigma_min: float
    sigma_max: float


def _check_square(sdp: StandardFormSDP, H: NDArray) -> NDArray:
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (sdp.n, sdp.n):
        raise InvalidInput(f"expected a {sdp.n}x{sdp.n} matrix, got shape {H.shape}")
    return H


def apply_A(sdp: StandardFormSDP, H: NDArray) -> NDArray:
    """[A(H)]_k = <A_k, H>."""
    H = _check_square(sdp, H)
    return np.asarray(sdp.A @ svec((H + H.T) / 2.0)).ravel()


def apply_Aadj(sdp: StandardFormSDP, y: NDArray) -> SymMatrix:
    """A*(y) = sum_k y_k A_k."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != sdp.m:
        raise InvalidInput(f"y has length {y.shape[0]}, expected {sdp.m}")
    return smat(np.asarray(sdp.A.T @ y).ravel(), sdp.n)


def slack(sdp: StandardFormSDP, y: NDArray) -> SymMatrix:
    """Z(y) = C - A*(y)."""
    return sdp.C - apply_Aadj(sdp, y)


def residuals(sdp: StandardFormSDP, X: NDArray, y: NDArray) -> Residuals:
    X = _check_square(sdp, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    Z = slack(sdp, y)
    p = float(np.vdot(sdp.C, X))
    d = float(sdp.b @ y)
    return Residuals(
        primal_infeas=float(np.linalg.norm(apply_A(sdp, X) - sdp.b)),
        dual_infeas=max(-lambda_min(Z), 0.0),
        cone_infeas=max(-lambda_min((X + X.T) / 2.0), 0.0),
        gap=abs(p - d),
        primal_obj=p,
        dual_obj=d,
    )


def check_surjective(sdp: StandardFormSDP, tol: float = SURJECTIVE_TOL) -> SurjectivityCheck:
    """
    Linear independence of the A_k via the singular values of the svec-row
    matrix. Large systems fall back to the eigenvalues of A A^T, which cannot
    resolve singular values below about 1e-7 relative, so the threshold there
    is raised to that floor.
    """
    m, N = sdp.A.shape
    if m > N:
        return SurjectivityCheck(False, 0.0, float(np.sqrt(np.linalg.norm(sdp.gram, 2))))
    if m * N <= _DENSE_SVD_LIMIT:
        dense = sdp.A.toarray() if sp.issparse(sdp.A) else sdp.A
        sigma = scipy.linalg.svdvals(dense)
        s_min, s_max = float(sigma[-1]), float(sigma[0])
        threshold = tol * s_max
    else:
        lam = scipy.linalg.eigh(sdp.gram, eigvals_only=True)
        s_min = float(np.sqrt(max(lam[0], 0.0)))
        s_max = float(np.sqrt(max(lam[-1], 0.0)))
        threshold = max(tol, np.sqrt(1e3 * np.finfo(float).eps)) * s_max
    return SurjectivityCheck(bool(s_min > threshold), s_min, s_max)


class SolveStatus(str, Enum):
    """
    How a solve call ended.

    CONVERGED: every residual is below the configured tolerances
    MAX_ITERATIONS: iteration cap reached, the best iterate is returned
    """

    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True, eq=False)
class SolverSolution:
    sdp: StandardFormSDP = field(repr=False)
    X: SymMatrix
    y: NDArray
    status: SolveStatus = SolveStatus.CONVERGED
    iterations: int = 0

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED

    @cached_property
    def Z(self) -> SymMatrix:
        return slack(self.sdp, self.y)

    @cached_property
    def residuals(self) -> Residuals:
        return residuals(self.sdp, self.X, self.y)

    @property
    def primal_obj(self) -> float:
        return self.residuals.primal_obj

    @property
    def dual_obj(self) -> float:
        return self.residuals.dual_obj


def congruence_rows(sdp: StandardFormSDP, U: NDArray) -> NDArray:
    """Matrix of S -> A(U S U^T) on svec coordinates: row k is svec(U^T A_k U)."""
    k = U.shape[1]
    out = np.zeros((sdp.m, svec_dim(k)))
    if k == 0:
        return out
    for idx, Ak in enumerate(sdp.constraint_list):
        out[idx] = svec(U.T @ (Ak @ U))
    return out


def product_columns(sdp: StandardFormSDP, V: NDArray) -> NDArray:
    """Column k is vec(A_k V)."""
    out = np.zeros((V.shape[0] * V.shape[1], sdp.m))
    if V.shape[1] == 0:
        return out
    for idx, Ak in enumerate(sdp.constraint_list):
        out[:, idx] = np.asarray(Ak @ V).ravel()
    return out
