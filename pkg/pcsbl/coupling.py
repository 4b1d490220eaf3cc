"""
Neighborhood structure of the pattern-coupled prior
Chain (1-D) and lattice (2-D) graphs, the precision mix η and the coupled
second-moment aggregate ω. Both are the same linear map (I + β·adjacency).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
import scipy.sparse

from .errors import ConfigError, DimensionError, DomainError

logger = logging.getLogger(__name__)

TOPOLOGIES = ("chain", "lattice")


def grid_to_index(q: int, l: int, Q: int) -> int:
    """One-based (q, l) -> one-based n = (l-1)Q + q"""
    return (l - 1) * Q + q


def index_to_grid(n: int, Q: int) -> Tuple[int, int]:
    """One-based n -> one-based (q, l); a zero remainder means q = Q"""
    q = n % Q
    if q == 0:
        q = Q
    l = (n - q) // Q + 1
    return q, l


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """Immutable neighbor sets over zero-based coefficient indices (column-major vec order)"""
    n: int
    topology: str
    shape: Tuple[int, int]
    adjacency: scipy.sparse.csr_matrix

    def neighbors(self, i: int) -> np.ndarray:
        start, stop = self.adjacency.indptr[i], self.adjacency.indptr[i + 1]
        return self.adjacency.indices[start:stop]

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbor_sum(self, values: np.ndarray) -> np.ndarray:
        return self.adjacency @ values

    def describe(self) -> Dict[str, Any]:
        if self.topology == "chain":
            return {"topology": "chain", "n": self.n}
        return {"topology": "lattice", "Q": self.shape[0], "L": self.shape[1]}


def make_lattice(Q: int, L: int) -> NeighborGraph:
    """4-neighborhood on a Q×L grid, truncated at the edges (no wraparound)"""
    if Q < 1 or L < 1:
        raise ConfigError(f"Lattice dims must be >= 1, got Q={Q}, L={L}")
    n = Q * L
    # index[q, l] = l*Q + q (zero-based)
    index = np.arange(n).reshape(L, Q).T
    pairs = [
        (index[:-1, :].ravel(), index[1:, :].ravel()),   # (q, l) ~ (q+1, l)
        (index[:, :-1].ravel(), index[:, 1:].ravel()),   # (q, l) ~ (q, l+1)
    ]
    u = np.concatenate([p[0] for p in pairs] + [p[1] for p in pairs])
    v = np.concatenate([p[1] for p in pairs] + [p[0] for p in pairs])
    adjacency = scipy.sparse.csr_matrix((np.ones(u.shape[0]), (u, v)), shape=(n, n))
    adjacency.sort_indices()
    return NeighborGraph(n=n, topology="lattice", shape=(Q, L), adjacency=adjacency)


def make_chain(N: int) -> NeighborGraph:
    """1-D chain; neighbor-for-neighbor identical to make_lattice(N, 1)"""
    if N < 1:
        raise ConfigError(f"Chain length must be >= 1, got {N}")
    lattice = make_lattice(N, 1)
    return NeighborGraph(n=N, topology="chain", shape=(N, 1), adjacency=lattice.adjacency)


def graph_from_dict(desc: Dict[str, Any]) -> NeighborGraph:
    if not isinstance(desc, dict) or desc.get("topology") not in TOPOLOGIES:
        raise ConfigError(f"Graph descriptor needs topology in {TOPOLOGIES}, got {desc!r:.80}")
    try:
        if desc["topology"] == "chain":
            return make_chain(int(desc["n"]))
        return make_lattice(int(desc["Q"]), int(desc["L"]))
    except KeyError as e:
        raise ConfigError(f"Graph descriptor is missing {e}") from e


def _check(graph: NeighborGraph, values, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (graph.n,):
        raise DimensionError(f"{name} must have length {graph.n}, got shape {values.shape}")
    return values


def eta_from_alpha(graph: NeighborGraph, alpha, beta: float) -> np.ndarray:
    """η_n = α_n + β Σ_{i ∈ N(n)} α_i"""
    alpha = _check(graph, alpha, "alpha")
    if np.any(alpha <= 0):
        raise DomainError("alpha must be entrywise > 0")
    return alpha + beta * graph.neighbor_sum(alpha)


def omega_from_moments(graph: NeighborGraph, m2, beta: float) -> np.ndarray:
    """ω_n = <x_n²> + β Σ_{i ∈ N(n)} <x_i²>"""
    m2 = _check(graph, m2, "m2")
    if np.any(m2 < 0):
        raise DomainError("second moments must be entrywise >= 0")
    return m2 + beta * graph.neighbor_sum(m2)


def nu_from_eta(graph: NeighborGraph, eta, beta: float) -> np.ndarray:
    """ν_n = 1/η_n + β Σ_{i ∈ N(n)} 1/η_i, the log-det part of ∂Q/∂α_n (times 2)"""
    inverse = 1.0 / _check(graph, eta, "eta")
    return inverse + beta * graph.neighbor_sum(inverse)
