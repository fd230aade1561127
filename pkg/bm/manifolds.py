"""
Constraint manifolds {F : A(F F^T) = b} of the factorized problem.

F is n x r and its rows split into blocks that are constrained independently:
single rows of unit norm (MaxCut, Z2, SBM), groups of rows with unit
Frobenius norm (ProductSDP), or d x r blocks with orthonormal rows
(OrthogonalCut). All operations act block by block.
"""

import logging
from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from core.errors import InvalidInput
from core.linalg import sym
from core.rng import gaussian

logger = logging.getLogger(__name__)


class Manifold(ABC):
    kind: str = ""

    def __init__(self, n: int, r: int, blocks: Sequence[NDArray]):
        if r < 1:
            raise InvalidInput(f"factor rank must be at least 1, got {r}")
        if r > n:
            raise InvalidInput(f"factor rank {r} exceeds the dimension {n}")
        self.n = n
        self.r = r
        self.blocks = [np.asarray(idx, dtype=np.int64) for idx in blocks]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.r

    @property
    def constraint_count(self) -> int:
        return sum(self._block_constraints(len(idx)) for idx in self.blocks)

    @property
    def dimension(self) -> int:
        return self.n * self.r - self.constraint_count

    #
    # Per-block geometry
    #

    @abstractmethod
    def _block_constraints(self, k: int) -> int: ...

    @abstractmethod
    def _project_block(self, B: NDArray, G: NDArray) -> NDArray: ...

    @abstractmethod
    def _retract_block(self, Y: NDArray) -> NDArray: ...

    @abstractmethod
    def _multiplier_block(self, B: NDArray, CB: NDArray) -> NDArray: ...

    @abstractmethod
    def _violation_block(self, B: NDArray) -> float: ...

    #
    # Whole-point operations
    #

    def _check(self, F: NDArray) -> NDArray:
        F = np.asarray(F, dtype=np.float64)
        if F.shape != self.shape:
            raise InvalidInput(f"factor must have shape {self.shape}, got {F.shape}")
        return F

    def project(self, F: NDArray, G: NDArray) -> NDArray:
        """Orthogonal projection of G onto the tangent space at F."""
        out = np.array(G, dtype=np.float64)
        for idx in self.blocks:
            out[idx] = self._project_block(F[idx], out[idx])
        return out

    def retract(self, Y: NDArray) -> NDArray:
        Y = self._check(Y)
        out = np.empty_like(Y)
        for idx in self.blocks:
            out[idx] = self._retract_block(Y[idx])
        return out

    def multipliers(self, F: NDArray, CF: NDArray) -> NDArray:
        """
        Block-diagonal Lambda with C F = Lambda F at critical points; the
        Riemannian Hessian form is 2 <D, (C - Lambda) D> on tangent D.
        """
        L = np.zeros((self.n, self.n))
        for idx in self.blocks:
            L[np.ix_(idx, idx)] = self._multiplier_block(F[idx], CF[idx])
        return L

    def violation(self, F: NDArray) -> float:
        return float(np.sqrt(sum(self._violation_block(F[idx]) ** 2 for idx in self.blocks)))

    def contains(self, F: NDArray, tol: float = 1e-8) -> bool:
        F = np.asarray(F, dtype=np.float64)
        return F.shape == self.shape and self.violation(F) <= tol

    def random_point(self, rng: np.random.Generator) -> NDArray:
        return self.retract(gaussian(rng, self.shape))

    def tangent_basis(self, F: NDArray) -> NDArray:
        """
        Orthonormal basis of the tangent space at F as columns of vec(D)
        (row-major), assembled block by block.
        """
        F = self._check(F)
        columns = []
        for idx in self.blocks:
            k = len(idx)
            local = np.eye(k * self.r)
            projected = np.column_stack(
                [self._project_block(F[idx], e.reshape(k, self.r)).ravel() for e in local]
            )
            basis = scipy.linalg.orth(projected)
            if basis.shape[1] == 0:
                continue
            positions = (idx[:, None] * self.r + np.arange(self.r)).ravel()
            embedded = np.zeros((self.n * self.r, basis.shape[1]))
            embedded[positions] = basis
            columns.append(embedded)
        if not columns:
            return np.zeros((self.n * self.r, 0))
        return np.hstack(columns)


class GroupSpheres(Manifold):
    """sum_{k in S_i} ||F_k||^2 = 1 for each group S_i."""

    kind = "group-spheres"

    def __init__(self, partition: Sequence[Sequence[int]], r: int):
        n = sum(len(group) for group in partition)
        super().__init__(n, r, [np.asarray(sorted(group)) for group in partition])

    def _block_constraints(self, k: int) -> int:
        return 1

    def _project_block(self, B, G):
        return G - np.vdot(G, B) * B

    def _retract_block(self, Y):
        norm = np.linalg.norm(Y)
        if norm == 0:
            raise InvalidInput("cannot retract a zero block")
        return Y / norm

    def _multiplier_block(self, B, CB):
        return np.vdot(CB, B) * np.eye(len(B))

    def _violation_block(self, B):
        return abs(float(np.vdot(B, B)) - 1.0)


class UnitRows(GroupSpheres):
    """diag(F F^T) = 1: every row on the unit sphere."""

    kind = "unit-rows"

    def __init__(self, n: int, r: int):
        super().__init__([[i] for i in range(n)], r)

    # row-wise operations are vectorized

    def project(self, F, G):
        G = np.asarray(G, dtype=np.float64)
        return G - np.sum(G * F, axis=1, keepdims=True) * F

    def retract(self, Y):
        Y = self._check(Y)
        norms = np.linalg.norm(Y, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise InvalidInput("cannot retract a zero row")
        return Y / norms

    def multipliers(self, F, CF):
        return np.diag(np.sum(CF * F, axis=1))

    def violation(self, F):
        return float(np.linalg.norm(np.sum(F * F, axis=1) - 1.0))


class BlockStiefel(Manifold):
    """Each d x r block F_s has orthonormal rows, F_s F_s^T = I_d."""

    kind = "block-stiefel"

    def __init__(self, S: int, d: int, r: int):
        if r < d:
            raise InvalidInput(f"block-Stiefel factors need r >= d, got r={r}, d={d}")
        self.S = S
        self.d = d
        super().__init__(S * d, r, [np.arange(s * d, (s + 1) * d) for s in range(S)])

    def _block_constraints(self, k: int) -> int:
        return k * (k + 1) // 2

    def _project_block(self, B, G):
        return G - sym(G @ B.T) @ B

    def _retract_block(self, Y):
        Q, R = np.linalg.qr(Y.T)
        signs = np.sign(np.diag(R))
        signs[signs == 0] = 1.0
        return (Q * signs).T

    def _multiplier_block(self, B, CB):
        return sym(CB @ B.T)

    def _violation_block(self, B):
        return float(np.linalg.norm(B @ B.T - np.eye(len(B))))
