"""
Dense symmetric linear algebra used by every other module.

Symmetric matrices are plain float64 numpy arrays; `as_sym` is the boundary
where inputs are validated and symmetrized. Vectorization uses the isometric
packing svec: the upper triangle in row-major order with off-diagonal entries
scaled by sqrt(2), so that <svec(A), svec(B)> = <A, B>.
"""

import logging
from functools import lru_cache
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray
from scipy.linalg import lapack

from core.config import RANK_EPS
from core.errors import InvalidInput

logger = logging.getLogger(__name__)

SymMatrix = NDArray[np.float64]

SQRT2 = float(np.sqrt(2.0))


class EigDecomp(NamedTuple):
    """Eigenvalues in descending order, eigenvectors as paired columns."""

    values: NDArray[np.float64]
    vectors: NDArray[np.float64]


class RankEstimate(NamedTuple):
    rank: int
    lambda_minpos: float | None


def as_sym(A, name: str = "matrix") -> SymMatrix:
    """Validate a square finite matrix and return its symmetric part."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidInput(f"{name} must be a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return (A + A.T) / 2.0


def sym(A: NDArray) -> NDArray:
    return (A + A.T) / 2.0


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def sym_dim(length: int) -> int:
    """Inverse of svec_dim."""
    n = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if svec_dim(n) != length:
        raise InvalidInput(f"{length} is not a triangular number")
    return n


@lru_cache(maxsize=64)
def svec_layout(n: int) -> tuple[NDArray, NDArray, NDArray]:
    """Row indices, column indices and scale factors of the svec packing."""
    rows, cols = np.triu_indices(n)
    scale = np.where(rows == cols, 1.0, SQRT2)
    for arr in (rows, cols, scale):
        arr.setflags(write=False)
    return rows, cols, scale


def svec_index(n: int, i: NDArray | int, j: NDArray | int) -> NDArray | int:
    """Position of the upper-triangle entry (i, j), i <= j, inside svec."""
    return i * n - (i * (i - 1)) // 2 + (j - i)


def svec(A: NDArray) -> NDArray:
    rows, cols, scale = svec_layout(A.shape[0])
    return A[rows, cols] * scale


def smat(v: NDArray, n: int | None = None) -> SymMatrix:
    n = sym_dim(len(v)) if n is None else n
    rows, cols, scale = svec_layout(n)
    A = np.zeros((n, n))
    A[rows, cols] = v / scale
    A[cols, rows] = A[rows, cols]
    return A


def eig_sym(A: NDArray) -> EigDecomp:
    """Symmetric eigendecomposition with eigenvalues sorted descending."""
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise InvalidInput("cannot decompose a matrix with non-finite entries")
    values, vectors = scipy.linalg.eigh(A)
    return EigDecomp(values[::-1].copy(), np.ascontiguousarray(vectors[:, ::-1]))


def eigvals_sym(A: NDArray) -> NDArray:
    """Eigenvalues only, descending."""
    if not np.all(np.isfinite(A)):
        raise InvalidInput("cannot decompose a matrix with non-finite entries")
    return scipy.linalg.eigh(A, eigvals_only=True)[::-1].copy()


def lambda_min(A: NDArray) -> float:
    return float(scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=[0, 0])[0])


def rank_eps(values: NDArray, eps: float = RANK_EPS) -> RankEstimate:
    """Count eigenvalues above eps; values must already be sorted descending."""
    values = np.asarray(values, dtype=np.float64)
    if eps <= 0:
        raise InvalidInput(f"rank threshold must be positive, got {eps}")
    if values.size > 1 and np.any(np.diff(values) > 0):
        raise InvalidInput("eigenvalues must be sorted in descending order")
    rank = int(np.count_nonzero(values > eps))
    return RankEstimate(rank, float(values[rank - 1]) if rank else None)


def fix_signs(Q: NDArray) -> NDArray:
    # first nonzero component of every column is made positive
    for k in range(Q.shape[1]):
        col = Q[:, k]
        tol = 1e-12 * max(np.abs(col).max(), 1e-300)
        lead = np.flatnonzero(np.abs(col) > tol)
        if lead.size and col[lead[0]] < 0:
            Q[:, k] = -col
    return Q


def orthonormal_basis(
    A: NDArray, eps: float = RANK_EPS, which: Literal["range", "null"] = "range"
) -> NDArray:
    """Orthonormal columns spanning the eigenspace above (range) or below (null) eps."""
    if which not in ("range", "null"):
        raise InvalidInput(f"unknown subspace {which!r}")
    dec = eig_sym(A)
    rank = rank_eps(dec.values, eps).rank
    cols = dec.vectors[:, :rank] if which == "range" else dec.vectors[:, rank:]
    return fix_signs(cols.copy())


def op_norm(A: NDArray) -> float:
    """Largest singular value."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(A)[0])


def psd_split(A: NDArray) -> tuple[SymMatrix, SymMatrix]:
    """
    Split a symmetric matrix as A = P - N with P, N PSD and PN = 0,
    i.e. the projections of A and -A onto the PSD cone.
    """
    values, vectors = scipy.linalg.eigh(A)
    pos = np.maximum(values, 0.0)
    neg = np.maximum(-values, 0.0)
    P = (vectors * pos) @ vectors.T
    N = (vectors * neg) @ vectors.T
    return sym(P), sym(N)


def independent_rows(M: NDArray, rel_tol: float = 1e-10) -> NDArray:
    """
    Indices (sorted) of a maximal set of numerically independent rows of M,
    chosen by pivoted Cholesky of the Gram matrix M M^T.
    """
    G = np.asarray(M @ M.T, dtype=np.float64)
    if G.size == 0:
        return np.arange(0)
    tol = rel_tol * max(float(np.max(np.diag(G))), 1e-300)
    _, piv, rank, info = lapack.dpstrf(G, tol=tol, lower=False)
    if info < 0:
        raise InvalidInput(f"pivoted Cholesky rejected its input (info={info})")
    return np.sort(piv[:rank] - 1)
