"""
Generators for the structured SDP families.

Each generator returns an Instance whose StandardFormSDP is in minimization
form. Maximization problems (Z2 synchronization, SBM) are folded in by
negating the cost, so reported objectives are the negated maxima.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from core.config import RANK_EPS
from core.errors import InvalidInput
from core.linalg import as_sym, eig_sym, eigvals_sym, fix_signs, lambda_min, rank_eps
from core.rng import gaussian, make_rng, random_signs
from execution.pool import run_trials
from instances.graphs import Graph
from instances.instance import CertificateInfo, GroundTruth, Instance, Signal
from sdp.model import StandardFormSDP, apply_A

logger = logging.getLogger(__name__)

# lambda_min(Z) >= -CERT_SLOP * ||Z|| counts as PSD
CERT_SLOP = 1e-8


def _diagonal_triplets(n: int) -> list[tuple[int, int, int, float]]:
    return [(k, k, k, 1.0) for k in range(n)]


#
# Simple SDP from any PSD matrix
#


def simple_from_psd(X_psd: NDArray, eps: float = RANK_EPS, label: str = "") -> Instance:
    """
    minimize tr(X)  s.t.  <v_i v_i^T, X> = lambda_i,
                          <(v_i v_j^T + v_j v_i^T)/2, X> = 0   (i < j <= r)

    with (lambda_i, v_i) the positive eigenpairs of X_psd. The program is
    simple and X_psd is its unique solution; the dual solution puts 1 on the
    diagonal constraints and 0 elsewhere.
    """
    X = as_sym(X_psd, "PSD matrix")
    n = X.shape[0]
    dec = eig_sym(X)
    if dec.values[-1] < -eps:
        raise InvalidInput(f"matrix is indefinite: smallest eigenvalue {dec.values[-1]:.3e}")
    r = rank_eps(dec.values, eps).rank
    if r == 0:
        raise InvalidInput("matrix has no eigenvalue above the rank threshold")
    lam = dec.values[:r]
    V = fix_signs(dec.vectors[:, :r].copy())

    constraints, b, y_star = [], [], []
    for i in range(r):
        constraints.append(np.outer(V[:, i], V[:, i]))
        b.append(lam[i])
        y_star.append(1.0)
    for i in range(r):
        for j in range(i + 1, r):
            P = np.outer(V[:, i], V[:, j])
            constraints.append((P + P.T) / 2.0)
            b.append(0.0)
            y_star.append(0.0)

    sdp = StandardFormSDP.from_dense(np.eye(n), constraints, b, label=label or f"psd-n{n}-r{r}")
    X_star = (V * lam) @ V.T
    return Instance(
        sdp,
        family="simple-from-psd",
        params={"family": "simple-from-psd", "n": n, "rank": r, "eps": eps},
        truth=GroundTruth(X_star, np.asarray(y_star), r),
    )


def random_simple_instance(n: int, rank: int, seed: int) -> Instance:
    """simple_from_psd on V diag(lambda) V^T with random V and lambda in [1, 2]."""
    if not 1 <= rank <= n:
        raise InvalidInput(f"rank must lie in 1..{n}, got {rank}")
    rng = make_rng(seed)
    Q, _ = np.linalg.qr(gaussian(rng, (n, rank)))
    lam = 1.0 + rng.random(rank)
    inst = simple_from_psd((Q * lam) @ Q.T, label=f"psd-n{n}-r{rank}-s{seed}")
    return Instance(inst.sdp, inst.family, {**inst.params, "seed": seed}, seed, inst.truth)


#
# MaxCut, OrthogonalCut, ProductSDP
#


def maxcut(graph: Graph, label: str = "") -> Instance:
    """minimize <-L, X>  s.t.  diag(X) = 1."""
    n = graph.n_vertices
    C = -graph.laplacian()
    sdp = StandardFormSDP.from_triplets(
        C, _diagonal_triplets(n), np.ones(n), label=label or f"maxcut-n{n}"
    )
    return Instance(sdp, family="maxcut", params={"family": "maxcut", "n": n, "edges": len(graph.edges)})


def orthogonal_cut(S: int, d: int, C: NDArray, label: str = "") -> Instance:
    """minimize <C, X>  s.t.  every d x d diagonal block of X is I_d."""
    if d not in (1, 2, 3):
        raise InvalidInput(f"block size must be 1, 2 or 3, got {d}")
    if S < 1:
        raise InvalidInput("need at least one block")
    C = as_sym(C, "cost matrix")
    if C.shape[0] != S * d:
        raise InvalidInput(f"cost matrix must be {S * d}x{S * d}, got {C.shape[0]}")

    triplets, b = [], []
    for s in range(S):
        for a in range(d):
            for c in range(a, d):
                i, j = s * d + a, s * d + c
                triplets.append((len(b), i, j, 1.0 if a == c else 0.5))
                b.append(1.0 if a == c else 0.0)
    sdp = StandardFormSDP.from_triplets(C, triplets, b, label=label or f"ocut-S{S}-d{d}")
    return Instance(sdp, family="ocut", params={"family": "ocut", "S": S, "d": d})


def product_sdp(partition: Sequence[Sequence[int]], C: NDArray, label: str = "") -> Instance:
    """minimize <C, X>  s.t.  sum_{k in S_i} X_kk = 1 for each group S_i (0-based)."""
    C = as_sym(C, "cost matrix")
    D = C.shape[0]
    groups = [sorted(int(k) for k in group) for group in partition]
    flat = [k for group in groups for k in group]
    if any(not group for group in groups):
        raise InvalidInput("partition has an empty group")
    if len(flat) != len(set(flat)):
        raise InvalidInput("partition groups overlap")
    if sorted(flat) != list(range(D)):
        raise InvalidInput(f"partition must cover 0..{D - 1} exactly")

    triplets = [(g, k, k, 1.0) for g, group in enumerate(groups) for k in group]
    sdp = StandardFormSDP.from_triplets(
        C, triplets, np.ones(len(groups)), label=label or f"product-D{D}-g{len(groups)}"
    )
    return Instance(sdp, family="product", params={"family": "product", "partition": groups})


def slater_point(instance: Instance) -> NDArray:
    """Strictly feasible X for the diagonal-constraint families."""
    family = instance.params.get("family", instance.family)
    n = instance.sdp.n
    if family in ("maxcut", "ocut", "z2sync", "sbm", "sbm-rescaled"):
        X = np.eye(n)
    elif family == "product":
        X = np.zeros((n, n))
        for group in instance.params["partition"]:
            X[group, group] = 1.0 / len(group)
    else:
        raise InvalidInput(f"no explicit Slater point for family {family!r}")
    if np.linalg.norm(apply_A(instance.sdp, X) - instance.sdp.b) > 1e-12 or lambda_min(X) <= 0:
        raise InvalidInput(f"Slater candidate is not strictly feasible for {instance.label}")
    return X


#
# Planted sign recovery: Z2 synchronization and SBM
#


def _sign_certificate(Y: NDArray, z: NDArray) -> tuple[NDArray, NDArray, CertificateInfo]:
    """
    For maximize <Y, X> s.t. diag(X) = 1 written as minimize <-Y, X>:
    y* = -(Y z) o z and Z* = ddiag(Y z z^T) - Y, which annihilates z.
    The certificate holds when Z* is PSD with z spanning its whole null space.
    """
    y_star = -(Y @ z) * z
    Z = np.diag(-y_star) - Y
    lam = eigvals_sym(Z)
    scale = max(abs(lam[0]), abs(lam[-1]), 1e-300)
    psd = bool(lam[-1] >= -CERT_SLOP * scale)
    gap = lam.size > 1 and rank_eps(lam, RANK_EPS).rank == lam.size - 1
    info = CertificateInfo(
        valid=psd and gap,
        lambda_min=float(lam[-1]),
        lambda_n_minus_1=float(lam[-2]) if lam.size > 1 else float(lam[-1]),
    )
    return y_star, Z, info


def _sign_instance(
    Y: NDArray, z: NDArray, family: str, label: str, params: dict, seed: int | None
) -> Instance:
    n = len(z)
    sdp = StandardFormSDP.from_triplets(-Y, _diagonal_triplets(n), np.ones(n), label=label)
    y_star, _, info = _sign_certificate(Y, z)
    truth = GroundTruth(np.outer(z, z), y_star, 1) if info.valid else None
    return Instance(sdp, family, params, seed, truth, Signal(z=z), info)


def z2_sync(n: int, gamma: float, seed: int) -> Instance:
    """
    maximize <Y, X> s.t. diag(X) = 1, X PSD, with Y = z z^T + gamma W,
    z uniform in {+-1}^n and W symmetric Gaussian with zero diagonal.
    """
    if n < 2:
        raise InvalidInput("Z2 synchronization needs n >= 2")
    if gamma < 0:
        raise InvalidInput(f"noise level must be nonnegative, got {gamma}")
    rng = make_rng(seed)
    z = random_signs(rng, n)
    W = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    W[iu] = gaussian(rng, len(iu[0]))
    W = W + W.T
    Y = np.outer(z, z) + gamma * W

    inst = _sign_instance(
        Y,
        z,
        "z2sync",
        f"z2sync-n{n}-s{seed}",
        {"family": "z2sync", "n": n, "gamma": gamma},
        seed,
    )
    logger.debug(
        f"z2sync n={n} gamma={gamma:g} seed={seed}: certificate valid={inst.certificate.valid}, "
        f"lambda_n-1={inst.certificate.lambda_n_minus_1:.4g}"
    )
    return inst


def signal_strength(n: int, p: float, q: float) -> float:
    return (p - q) / np.sqrt(2.0 * (p + q)) * np.sqrt(n)


def q_for_signal(n: int, p: float, signal: float) -> float:
    """Solve signal_strength(n, p, q) = signal for q in [0, p)."""
    if not 0 < p <= 1:
        raise InvalidInput(f"p must lie in (0, 1], got {p}")
    if signal <= 0:
        raise InvalidInput("signal strength must be positive")
    c = signal**2 / n
    if p < 2 * c:
        raise InvalidInput(f"signal {signal:g} is unreachable with p={p:g} at n={n}")
    return max(0.0, float(p + c - np.sqrt(c * c + 4 * p * c)))


class SbmPair(NamedTuple):
    original: Instance
    rescaled: Instance


def sbm(n: int, p: float, q: float, seed: int) -> SbmPair:
    """
    Balanced two-community SBM. The original cost is A - (p+q)/2 J with the
    diagonal of A set to (p-q)/2; the rescaled one multiplies it by 2/(p-q).
    """
    if n < 2 or n % 2:
        raise InvalidInput(f"n must be even and at least 2, got {n}")
    if not 0 <= q < p <= 1:
        raise InvalidInput(f"need 0 <= q < p <= 1, got p={p}, q={q}")
    rng = make_rng(seed)
    z = rng.permutation(np.repeat([1.0, -1.0], n // 2))
    same = np.equal.outer(z, z)
    probs = np.where(same, p, q)
    iu = np.triu_indices(n, 1)
    A = np.zeros((n, n))
    A[iu] = (rng.random(len(iu[0])) < probs[iu]).astype(float)
    A = A + A.T
    np.fill_diagonal(A, (p - q) / 2.0)

    B = A - (p + q) / 2.0 * np.ones((n, n))
    A_tilde = 2.0 / (p - q) * B
    params = {"n": n, "p": p, "q": q, "signal": float(signal_strength(n, p, q))}

    original = _sign_instance(
        B, z, "sbm", f"sbm-n{n}-s{seed}", {"family": "sbm", **params}, seed
    )
    rescaled = _sign_instance(
        A_tilde, z, "sbm-rescaled", f"sbm-rescaled-n{n}-s{seed}",
        {"family": "sbm-rescaled", **params}, seed,
    )
    logger.debug(f"sbm n={n} p={p:g} q={q:g} seed={seed}: certificate valid={rescaled.certificate.valid}")
    return SbmPair(original, rescaled)


@dataclass
class CertificateRate:
    family: str
    count: int
    valid: int
    failed: int
    lambda_n_minus_1: list[float]

    @property
    def valid_fraction(self) -> float:
        return self.valid / self.count if self.count else 0.0

    def summary(self) -> dict:
        lam = np.asarray(self.lambda_n_minus_1)
        return {
            "family": self.family,
            "count": self.count,
            "valid": self.valid,
            "failed": self.failed,
            "valid_fraction": self.valid_fraction,
            "lambda_n_minus_1_min": float(lam.min()) if lam.size else None,
            "lambda_n_minus_1_median": float(np.median(lam)) if lam.size else None,
        }


def certificate_rate(
    family: str, n: int, count: int, seed: int, use_ray: bool = False, **params
) -> CertificateRate:
    """Fraction of seeds seed..seed+count-1 whose closed-form certificate is valid."""
    if family == "z2sync":
        def trial(s: int) -> CertificateInfo:
            return z2_sync(n, params["gamma"], s).certificate
    elif family == "sbm":
        def trial(s: int) -> CertificateInfo:
            return sbm(n, params["p"], params["q"], s).rescaled.certificate
    else:
        raise InvalidInput(f"no closed-form certificate for family {family!r}")

    outcomes = run_trials(trial, count, seed, use_ray=use_ray)
    infos = [o.result for o in outcomes if o.ok]
    rate = CertificateRate(
        family=family,
        count=count,
        valid=sum(info.valid for info in infos),
        failed=count - len(infos),
        lambda_n_minus_1=[info.lambda_n_minus_1 for info in infos if info.valid],
    )
    logger.info(f"{family} n={n}: certificate valid in {rate.valid}/{count} trials")
    return rate
