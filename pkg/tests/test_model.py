import math

import networkx as nx
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseiqc.generate import GeneratorConfig, generate_instance, sample_scale_free
from sparseiqc.lti import FrequencyGrid, StateSpaceSystem
from sparseiqc.model import (
    InterconnectedSystem,
    InterconnectionMatrix,
    IqcMultiplierSpec,
    Subsystem,
    as_adjacency,
    build_interconnection,
    chain_interconnection,
    diag_multiplier,
    path_adjacency,
    well_posed,
)


def static(x):
    return StateSpaceSystem.static(np.atleast_2d(x))


def test_subsystem_dimension_checks():
    s = Subsystem(static(np.zeros((2, 2))), static(np.zeros((2, 1))),
                  static(np.zeros((3, 2))), static(np.zeros((3, 1))))
    assert (s.d, s.m, s.l) == (2, 1, 3)
    assert s.uncertainty.dim == 2
    with pytest.raises(ValueError):
        Subsystem(static(np.zeros((2, 1))), static(np.zeros((2, 1))),
                  static(np.zeros((3, 2))), static(np.zeros((3, 1))))
    with pytest.raises(ValueError):
        Subsystem(static(np.zeros((2, 2))), static(np.zeros((2, 1))),
                  static(np.zeros((3, 2))), static(np.zeros((3, 2))))


def test_interconnection_rejects_two_drivers_per_input():
    with pytest.raises(ValueError):
        InterconnectionMatrix(sp.csr_matrix(np.ones((1, 2))), (1,), (2,))
    with pytest.raises(ValueError):
        InterconnectionMatrix(sp.csr_matrix([[2.0]]), (1,), (1,))


def test_adjacency_validation():
    with pytest.raises(ValueError):
        as_adjacency([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        as_adjacency([[1, 0], [0, 0]])


def test_single_edge():
    g = build_interconnection([[0, 1], [1, 0]])
    assert np.array_equal(g.matrix.toarray(), [[0, 1], [1, 0]])


def test_empty_adjacency_gives_empty_gamma():
    g = build_interconnection(np.zeros((3, 3), dtype=int))
    assert g.shape == (0, 0)
    assert g.in_sizes == (0, 0, 0)


def test_path_of_three():
    g = build_interconnection(path_adjacency(3)).matrix.toarray()
    assert g.shape == (4, 4)
    assert g.sum() == 4
    assert np.all(g.sum(axis=0) == 1) and np.all(g.sum(axis=1) == 1)


@settings(max_examples=25, deadline=None)
@given(N=st.integers(2, 40), seed=st.integers(0, 2**32 - 1))
def test_tree_interconnection_is_a_permutation(N, seed):
    A = sample_scale_free(N, 2.5, seed)
    g = build_interconnection(A)
    G = g.matrix.toarray()
    assert G.sum() == A.sum()
    assert np.all(G.sum(axis=0) == 1) and np.all(G.sum(axis=1) == 1)
    assert g.in_sizes == tuple(A.sum(axis=1))


def test_chain_small_cases():
    assert np.array_equal(chain_interconnection(2).matrix.toarray(), [[0, 1], [1, 0]])
    G = chain_interconnection(3).matrix.toarray()
    # w1 = z2_1, w2_1 = z1, w2_2 = z3, w3 = z2_2; channel order: 1 | 2_1 2_2 | 3
    expected = np.zeros((4, 4))
    expected[0, 1] = expected[1, 0] = expected[2, 3] = expected[3, 2] = 1
    assert np.array_equal(G, expected)
    with pytest.raises(ValueError):
        chain_interconnection(1)


def test_chain_is_symmetric_permutation():
    for N in range(2, 21):
        G = chain_interconnection(N).matrix.toarray()
        assert G.shape == (2 * N - 2, 2 * N - 2)
        assert np.array_equal(G, G.T)
        assert np.array_equal(G @ G.T, np.eye(2 * N - 2))


def channel_graph(g: InterconnectionMatrix):
    """Subsystem-level multigraph of the nonzeros of Gamma."""
    owner_in = np.repeat(np.arange(len(g.in_sizes)), g.in_sizes)
    owner_out = np.repeat(np.arange(len(g.out_sizes)), g.out_sizes)
    coo = g.matrix.tocoo()
    G = nx.DiGraph()
    G.add_nodes_from(range(len(g.in_sizes)))
    G.add_edges_from(zip(owner_out[coo.col], owner_in[coo.row]))
    return G


def test_chain_matches_algorithm_on_path_graph():
    for N in range(2, 21):
        a = chain_interconnection(N)
        b = build_interconnection(path_adjacency(N))
        assert nx.is_isomorphic(channel_graph(a), channel_graph(b))
        assert a.in_sizes == b.in_sizes


def test_well_posed_examples():
    grid = FrequencyGrid.default()
    free = InterconnectionMatrix(sp.csr_matrix((1, 1)), (1,), (1,))
    sub = Subsystem(static(0.0), static(0.0), static(0.0), static(1.0))
    assert well_posed(InterconnectedSystem([sub], free), grid)
    loop = InterconnectionMatrix(sp.csr_matrix([[1.0]]), (1,), (1,))
    assert not well_posed(InterconnectedSystem([sub], loop), grid)
    assert well_posed(generate_instance(GeneratorConfig(N=6, seed=1)), grid)


def test_diag_multiplier_examples():
    spec1 = IqcMultiplierSpec(1)
    assert np.array_equal(diag_multiplier([spec1], [1.0]), np.diag([1.0, -1.0]))
    P = diag_multiplier([spec1, spec1], [2.0, 3.0])
    assert np.array_equal(P[:2, :2], np.diag([2.0, 3.0]))
    assert np.array_equal(P[2:, 2:], np.diag([-2.0, -3.0]))
    assert not P[:2, 2:].any() and not P[2:, :2].any()
    assert not diag_multiplier([spec1, spec1], [0.0, 0.0]).any()
    with pytest.raises(ValueError):
        diag_multiplier([spec1], [-1.0])


@settings(max_examples=50, deadline=None)
@given(dims=st.lists(st.integers(1, 3), min_size=1, max_size=5), data=st.data())
def test_diag_multiplier_sign_structure(dims, data):
    r = data.draw(st.lists(st.floats(0, 1e3), min_size=len(dims), max_size=len(dims)))
    P = diag_multiplier([IqcMultiplierSpec(d) for d in dims], r)
    d = sum(dims)
    assert np.linalg.eigvalsh(P[:d, :d]).min() >= 0
    assert np.linalg.eigvalsh(P[d:, d:]).max() <= 0


def test_gamma_norm_of_permutation_is_one():
    assert chain_interconnection(7).norm() == 1.0
    assert chain_interconnection(7).scaled(2.0).norm() == 2.0
    assert math.isclose(build_interconnection(sample_scale_free(30, 2.5, 1)).norm(), 1.0)
