#!/usr/bin/env python3
"""
Tests for neighbor graphs and the coupled precision / moment maps
"""

import os
import sys

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pcsbl.coupling import (eta_from_alpha, graph_from_dict, grid_to_index, index_to_grid,
                            make_chain, make_lattice, nu_from_eta, omega_from_moments)
from pcsbl.errors import ConfigError, DimensionError, DomainError
from pcsbl.rng import make_rng


def _one_based_neighbors(graph, n):
    return set(int(i) + 1 for i in graph.neighbors(n - 1))


def test_lattice_examples():
    two = make_lattice(2, 2)
    assert _one_based_neighbors(two, 1) == {2, 3}
    assert _one_based_neighbors(two, 4) == {2, 3}
    assert _one_based_neighbors(make_lattice(1, 1), 1) == set()
    assert _one_based_neighbors(make_lattice(3, 3), 5) == {2, 4, 6, 8}


def test_chain_examples():
    assert _one_based_neighbors(make_chain(3), 2) == {1, 3}
    assert _one_based_neighbors(make_chain(1), 1) == set()
    chain = make_chain(17)
    lattice = make_lattice(17, 1)
    for i in range(17):
        assert_array_equal(chain.neighbors(i), lattice.neighbors(i))


def test_lattice_is_symmetric_and_bounded():
    graph = make_lattice(5, 7)
    dense = graph.adjacency.toarray()
    assert_array_equal(dense, dense.T)
    assert np.all(np.diag(dense) == 0)
    degrees = graph.degrees()
    assert degrees.max() == 4 and degrees.min() == 2
    # corners have two neighbors, edges three
    assert degrees[0] == 2 and degrees[1] == 3


def test_grid_index_bijection():
    Q, L = 4, 6
    seen = set()
    for l in range(1, L + 1):
        for q in range(1, Q + 1):
            n = grid_to_index(q, l, Q)
            assert index_to_grid(n, Q) == (q, l)
            seen.add(n)
    assert seen == set(range(1, Q * L + 1))
    assert index_to_grid(8, 4) == (4, 2)


def test_lattice_neighbors_follow_grid_geometry():
    Q, L = 4, 3
    graph = make_lattice(Q, L)
    for n in range(1, Q * L + 1):
        q, l = index_to_grid(n, Q)
        expected = set()
        for dq, dl in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if 1 <= q + dq <= Q and 1 <= l + dl <= L:
                expected.add(grid_to_index(q + dq, l + dl, Q))
        assert _one_based_neighbors(graph, n) == expected


def test_eta_examples():
    alpha = np.array([0.3, 2.0, 7.0, 1.0])
    assert_array_equal(eta_from_alpha(make_lattice(2, 2), alpha, 0.0), alpha)
    assert_allclose(eta_from_alpha(make_chain(3), [1, 1, 1], 1.0), [2, 3, 2])
    assert_allclose(eta_from_alpha(make_lattice(2, 2), [1, 2, 3, 4], 0.5), [3.5, 4.5, 5.5, 6.5])
    try:
        eta_from_alpha(make_chain(3), [1, 0, 1], 1.0)
    except DomainError:
        pass
    else:
        assert False, "zero alpha should be rejected"


def test_omega_examples():
    m2 = np.array([1.0, 4.0, 9.0])
    assert_array_equal(omega_from_moments(make_chain(3), m2, 0.0), m2)
    assert_allclose(omega_from_moments(make_chain(3), m2, 1.0), [5, 14, 13])
    assert_array_equal(omega_from_moments(make_chain(3), np.zeros(3), 1.0), np.zeros(3))
    try:
        omega_from_moments(make_chain(3), [1, 2], 1.0)
    except DimensionError:
        pass
    else:
        assert False, "wrong length should be rejected"


def _coupling_matrix(Q, L, beta):
    """I + β·(4-neighbor adjacency), built from grid geometry alone"""
    n = Q * L
    matrix = np.eye(n)
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            (qa, la), (qb, lb) = index_to_grid(a, Q), index_to_grid(b, Q)
            if abs(qa - qb) + abs(la - lb) == 1:
                matrix[a - 1, b - 1] = beta
    return matrix


def test_coupled_maps_match_materialized_matrix():
    rng = make_rng(31)
    cases = [(make_chain(64), 64, 1), (make_chain(7), 7, 1), (make_lattice(8, 8), 8, 8),
             (make_lattice(5, 3), 5, 3), (make_lattice(1, 1), 1, 1)]
    for graph, Q, L in cases:
        for beta in (0.0, 0.3, 1.0):
            matrix = _coupling_matrix(Q, L, beta)
            alpha = 10 ** rng.uniform(-3, 3, graph.n)
            m2 = rng.exponential(1.0, graph.n)
            m2[rng.random(graph.n) < 0.3] = 0.0
            assert_allclose(eta_from_alpha(graph, alpha, beta), matrix @ alpha, rtol=1e-13)
            assert_allclose(omega_from_moments(graph, m2, beta), matrix @ m2, rtol=1e-13, atol=0)


def test_eta_grows_when_any_alpha_grows():
    rng = make_rng(32)
    graph = make_lattice(6, 6)
    for _ in range(200):
        beta = float(rng.uniform(0, 1))
        alpha = 10 ** rng.uniform(-3, 3, graph.n)
        i = int(rng.integers(0, graph.n))
        bumped = alpha.copy()
        bumped[i] *= float(rng.uniform(1.01, 100.0))
        before = eta_from_alpha(graph, alpha, beta)
        after = eta_from_alpha(graph, bumped, beta)
        assert np.all(after >= before)
        assert after[i] > before[i]
        touched = set(int(j) for j in graph.neighbors(i)) | {i}
        untouched = [j for j in range(graph.n) if j not in touched]
        assert_array_equal(after[untouched], before[untouched])


def test_nu_from_eta():
    graph = make_chain(3)
    assert_allclose(nu_from_eta(graph, [1.0, 2.0, 4.0], 1.0), [1.5, 1.75, 0.75])


def test_graph_descriptor_round_trip():
    for graph in (make_chain(9), make_lattice(3, 5)):
        rebuilt = graph_from_dict(graph.describe())
        assert rebuilt.topology == graph.topology
        assert (rebuilt.adjacency != graph.adjacency).nnz == 0
    try:
        graph_from_dict({"topology": "ring", "n": 4})
    except ConfigError:
        pass
    else:
        assert False, "unknown topology should be rejected"


if __name__ == "__main__":
    for name, func in list(globals().items()):
        if name.startswith("test_") and callable(func):
            print(f"🔍 {name}")
            func()
    print("✅ All coupling tests passed")
