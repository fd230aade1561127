"""
Matrix completion: planted low-rank matrices, observation patterns, the
tangent-space projectors at the planted matrix, and the lifted trace
minimization SDP

    minimize tr(W1) + tr(W2)  s.t.  [W1, X; X^T, W2] PSD,  X_ij = M_ij on Omega.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from core.errors import InvalidInput
from core.rng import gaussian, make_rng
from instances.instance import GroundTruth, Instance, Signal
from sdp.model import StandardFormSDP

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class McProblem:
    n1: int
    n2: int
    r: int
    X_natural: NDArray
    U: NDArray
    sigma: NDArray
    V: NDArray
    mask: NDArray
    p: float
    mu: float
    seed: int | None = None
    batches: list[NDArray] | None = None

    @property
    def omega(self) -> list[tuple[int, int]]:
        """Observed positions, sorted."""
        rows, cols = np.nonzero(self.mask)
        return list(zip(rows.tolist(), cols.tolist()))

    @property
    def n(self) -> int:
        return max(self.n1, self.n2)

    def with_mask(self, mask: NDArray, batches: list[NDArray] | None = None) -> "McProblem":
        return replace(self, mask=np.asarray(mask, dtype=bool), batches=batches)


def incoherence(U: NDArray, V: NDArray) -> float:
    """
    Smallest mu with ||U^T e_i||^2 <= mu r / n1 and ||V^T e_j||^2 <= mu r / n2.
    """
    r = U.shape[1]
    row_u = np.max(np.sum(U * U, axis=1)) * U.shape[0] / r
    row_v = np.max(np.sum(V * V, axis=1)) * V.shape[0] / r
    return float(max(row_u, row_v))


def sample_mask(rng: np.random.Generator, n1: int, n2: int, p: float) -> NDArray:
    return rng.random((n1, n2)) < p


def batch_probability(p: float, k0: int) -> float:
    """q with 1 - (1 - q)^k0 = p."""
    return 1.0 - (1.0 - p) ** (1.0 / k0)


def sample_batches(rng: np.random.Generator, n1: int, n2: int, q: float, k0: int) -> list[NDArray]:
    return [sample_mask(rng, n1, n2, q) for _ in range(k0)]


def from_matrix(
    X: NDArray, r: int | None = None, p: float = 1.0, seed: int | None = None, mask: NDArray | None = None
) -> McProblem:
    """Wrap a given matrix; r defaults to its numerical rank."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInput("matrix completion needs a 2-d matrix")
    U, s, Vt = scipy.linalg.svd(X, full_matrices=False)
    if r is None:
        r = int(np.count_nonzero(s > 1e-10 * max(s[0], 1e-300)))
    if not 1 <= r <= min(X.shape) or s[r - 1] <= 1e-10 * s[0]:
        raise InvalidInput(f"rank {r} is not supported by the matrix")
    U, s, V = U[:, :r], s[:r], Vt[:r].T
    if mask is None:
        mask = np.ones(X.shape, dtype=bool) if p >= 1 else sample_mask(make_rng(seed or 0), *X.shape, p)
    return McProblem(
        X.shape[0], X.shape[1], r, (U * s) @ V.T, U, s, V, np.asarray(mask, dtype=bool),
        p, incoherence(U, V), seed,
    )


def mc_generate(n1: int, n2: int, r: int, p: float, seed: int) -> McProblem:
    """
    X = G1 G2^T with Gaussian factors, re-factored by SVD, observed entrywise
    with probability p.
    """
    if not 1 <= r <= min(n1, n2):
        raise InvalidInput(f"rank must lie in 1..{min(n1, n2)}, got {r}")
    if not 0 < p <= 1:
        raise InvalidInput(f"observation probability must lie in (0, 1], got {p}")
    rng = make_rng(seed)
    X = gaussian(rng, (n1, r)) @ gaussian(rng, (n2, r)).T
    mask = sample_mask(rng, n1, n2, p)
    prob = from_matrix(X, r, p, seed, mask)
    logger.debug(f"MC n1={n1} n2={n2} r={r} p={p:.3g}: |Omega|={int(mask.sum())}, mu={prob.mu:.3g}")
    return prob


#
# Projectors
#


def proj_omega(mask: NDArray, Z: NDArray) -> NDArray:
    return np.where(mask, Z, 0.0)


def proj_T(U: NDArray, V: NDArray, Z: NDArray) -> NDArray:
    """UU^T Z + Z VV^T - UU^T Z VV^T."""
    UtZ = U.T @ Z
    ZV = Z @ V
    return U @ UtZ + ZV @ V.T - U @ (UtZ @ V) @ V.T


def proj_T_perp(U: NDArray, V: NDArray, Z: NDArray) -> NDArray:
    return Z - proj_T(U, V, Z)


#
# Lifted SDP
#


def lifted_truth(prob: McProblem) -> NDArray:
    """[U S U^T, X; X^T, V S V^T] = W W^T with W = [U; V] sqrt(S)."""
    W = np.vstack([prob.U, prob.V]) * np.sqrt(prob.sigma)
    return W @ W.T


def mc_lift(prob: McProblem, label: str = "") -> Instance:
    """
    minimize tr(X~)  s.t.  <(e_i e_{n1+j}^T + e_{n1+j} e_i^T)/2, X~> = M_ij on Omega.
    """
    omega = prob.omega
    if not omega:
        raise InvalidInput("no observed entries")
    N = prob.n1 + prob.n2
    triplets = [(k, i, prob.n1 + j, 0.5) for k, (i, j) in enumerate(omega)]
    b = [prob.X_natural[i, j] for i, j in omega]
    sdp = StandardFormSDP.from_triplets(
        np.eye(N), triplets, b, label=label or f"mc-{prob.n1}x{prob.n2}-r{prob.r}-s{prob.seed}"
    )
    return Instance(
        sdp,
        family="mc",
        params={"family": "mc", "n1": prob.n1, "n2": prob.n2, "rank": prob.r, "p": prob.p},
        seed=prob.seed,
        truth=GroundTruth(lifted_truth(prob), None, prob.r),
        signal=Signal(
            X_natural=prob.X_natural, U=prob.U, sigma=prob.sigma, V=prob.V,
            omega=omega, p=prob.p, mu=prob.mu,
        ),
    )


def problem_from_instance(instance: Instance) -> McProblem:
    """Rebuild the McProblem recorded in a lifted instance."""
    s = instance.signal
    if instance.family != "mc" or s is None or s.X_natural is None or s.omega is None:
        raise InvalidInput(f"{instance.label} is not a lifted matrix-completion instance")
    mask = np.zeros(s.X_natural.shape, dtype=bool)
    for i, j in s.omega:
        mask[i, j] = True
    return McProblem(
        s.X_natural.shape[0], s.X_natural.shape[1], s.U.shape[1], s.X_natural,
        s.U, s.sigma, s.V, mask, s.p if s.p is not None else float(mask.mean()),
        s.mu if s.mu is not None else incoherence(s.U, s.V), instance.seed,
    )


class NuclearNormSdp(NamedTuple):
    instance: Instance
    Y_tilde: NDArray
    y_star: NDArray


def nuclear_norm_sdp(X_natural: NDArray, r: int | None = None) -> NuclearNormSdp:
    """
    Fully observed lifting of X; its optimal value is 2||X||_* and
    [0, UV^T; VU^T, 0] gives the closed-form dual.
    """
    prob = from_matrix(X_natural, r)
    inst = mc_lift(prob, label=f"nucnorm-{prob.n1}x{prob.n2}")
    Y = prob.U @ prob.V.T
    Y_tilde = np.block([[np.zeros((prob.n1, prob.n1)), Y], [Y.T, np.zeros((prob.n2, prob.n2))]])
    y_star = np.array([2.0 * Y[i, j] for i, j in prob.omega])
    truth = GroundTruth(inst.truth.X_star, y_star, prob.r)
    return NuclearNormSdp(replace(inst, truth=truth), Y_tilde, y_star)


def default_probability(n: int, r: int) -> float:
    """3 r log(n) / n, capped at 1."""
    return min(1.0, 3.0 * r * math.log(n) / n)
