"""
Seeded random streams.

Every generator in the package draws from a counter-based Philox stream keyed
by the seed. Gaussians come from the Box-Muller transform applied to that
uniform stream.
"""

import numpy as np
from numpy.typing import NDArray


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Seed for trial `index` of a sweep started at `seed`."""
    return int(seed) + int(index)


def gaussian(rng: np.random.Generator, shape: int | tuple[int, ...]) -> NDArray:
    """Standard normal samples via Box-Muller."""
    size = int(np.prod(shape))
    half = (size + 1) // 2
    # 1 - U lies in (0, 1], so the log is finite
    u1 = 1.0 - rng.random(half)
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    samples = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return samples[:size].reshape(shape)


def gaussian_symmetric(rng: np.random.Generator, n: int) -> NDArray:
    """Symmetric matrix with iid N(0,1) upper triangle (diagonal included)."""
    G = np.zeros((n, n))
    iu = np.triu_indices(n)
    G[iu] = gaussian(rng, len(iu[0]))
    return G + np.triu(G, 1).T


def random_orthogonal(rng: np.random.Generator, n: int, k: int | None = None) -> NDArray:
    """n x k matrix with orthonormal columns, Haar distributed."""
    k = n if k is None else k
    Q, R = np.linalg.qr(gaussian(rng, (n, k)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def random_signs(rng: np.random.Generator, n: int) -> NDArray:
    return np.where(rng.random(n) < 0.5, -1.0, 1.0)
