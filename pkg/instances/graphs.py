"""
Weighted graphs for the MaxCut family: Gset edge-list files and random graphs.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np
from numpy.typing import NDArray

from core.errors import InvalidInput, ParseError
from core.rng import make_rng, random_signs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """Vertices are 1-based; edges are (i, j, weight)."""

    n_vertices: int
    edges: list[tuple[int, int, float]]

    def __post_init__(self):
        if self.n_vertices < 1:
            raise InvalidInput("a graph needs at least one vertex")
        for i, j, _ in self.edges:
            if not (1 <= i <= self.n_vertices and 1 <= j <= self.n_vertices):
                raise InvalidInput(f"edge ({i}, {j}) outside 1..{self.n_vertices}")

    def laplacian(self) -> NDArray:
        """L = D - W; repeated edges add up."""
        L = np.zeros((self.n_vertices, self.n_vertices))
        for i, j, w in self.edges:
            if i == j:
                raise InvalidInput(f"self-loop at vertex {i}")
            a, c = i - 1, j - 1
            L[a, a] += w
            L[c, c] += w
            L[a, c] -= w
            L[c, a] -= w
        return L


def _fields(line: str, count: int, lineno: int) -> list[str]:
    parts = line.split()
    if len(parts) != count:
        raise ParseError(f"expected {count} fields, found {len(parts)}", line=lineno)
    return parts


def parse_gset(path: str | Path) -> Graph:
    """
    Gset edge list: a header "n m", then m lines "i j w" with 1-based
    vertices. Blank lines are ignored.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as e:
        raise ParseError(f"{path} does not exist") from e

    lines = [(k, line) for k, line in enumerate(text.splitlines(), start=1) if line.strip()]
    if not lines:
        raise ParseError(f"{path} is empty")

    lineno, header = lines[0]
    try:
        n, m = (int(v) for v in _fields(header, 2, lineno))
    except ValueError as e:
        raise ParseError(f"header must be two integers: {header.strip()!r}", line=lineno) from e
    if n < 1 or m < 0:
        raise ParseError(f"bad header values n={n}, m={m}", line=lineno)

    body = lines[1:]
    if len(body) != m:
        where = body[m][0] if len(body) > m else (body[-1][0] if body else lineno)
        raise ParseError(f"header announces {m} edges, file has {len(body)}", line=where)

    edges = []
    for lineno, line in body:
        i_s, j_s, w_s = _fields(line, 3, lineno)
        try:
            i, j, w = int(i_s), int(j_s), float(w_s)
        except ValueError as e:
            raise ParseError(f"malformed edge {line.strip()!r}", line=lineno) from e
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(f"vertex out of range 1..{n}", line=lineno)
        if i == j:
            raise ParseError(f"self-loop at vertex {i}", line=lineno)
        edges.append((i, j, w))

    logger.info(f"Parsed {path.name}: {n} vertices, {m} edges")
    return Graph(n, edges)


def random_graph(n: int, density: float, seed: int, signed: bool = False) -> Graph:
    """Erdos-Renyi G(n, density) with unit weights, or random +-1 weights."""
    if n < 1 or not 0 <= density <= 1:
        raise InvalidInput(f"need n >= 1 and density in [0, 1], got n={n}, density={density}")
    G = nx.gnp_random_graph(n, density, seed=seed)
    pairs = sorted((min(u, v), max(u, v)) for u, v in G.edges())
    weights = random_signs(make_rng(seed), len(pairs)) if signed else np.ones(len(pairs))
    return Graph(n, [(u + 1, v + 1, float(w)) for (u, v), w in zip(pairs, weights)])
