import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseiqc.generate import GeneratorConfig, generate_instance
from sparseiqc.linalg_sparse import (
    NotPositiveDefinite,
    Permutation,
    SparsityPattern,
    cholesky,
    log_det,
    min_degree_order,
    solve_with_factor,
    symbolic_factor,
)
from sparseiqc.lmi import sparse_lmi


def elimination_fill(pattern, perm):
    """Fill of the elimination game on a dense boolean graph, O(n^3)."""
    n = pattern.order
    A = np.zeros((n, n), dtype=bool)
    A[pattern.rows, pattern.cols] = True
    A |= A.T
    np.fill_diagonal(A, False)
    A = A[np.ix_(perm, perm)]
    added = 0
    for k in range(n):
        later = np.flatnonzero(A[k, k + 1 :]) + k + 1
        for a, b in itertools.combinations(later, 2):
            if not A[a, b]:
                A[a, b] = A[b, a] = True
                added += 1
    return added


def random_spd(rng, n, density=1.0):
    if density < 1.0:
        M = sp.random(n, n, density=density, random_state=rng).toarray()
    else:
        M = rng.standard_normal((n, n))
    return M @ M.T + n * np.eye(n)


def pattern_of(A):
    return SparsityPattern.from_matrix(A)


def test_pattern_always_contains_diagonal():
    p = SparsityPattern.from_entries(3, [(2, 0)])
    assert p.entries() >= {(0, 0), (1, 1), (2, 2), (2, 0)}
    assert p.nnz == 4


def test_pattern_rejects_out_of_range_index():
    with pytest.raises(ValueError):
        SparsityPattern.from_entries(2, [(2, 0)])


def test_permutation_inverse_composes_to_identity():
    p = Permutation([2, 0, 3, 1])
    assert np.array_equal(p.perm[p.inverse], np.arange(4))
    assert np.array_equal(p.inverse[p.perm], np.arange(4))
    with pytest.raises(ValueError):
        Permutation([0, 0, 1])


def test_tridiagonal_min_degree_gives_zero_fill():
    p = SparsityPattern.from_entries(5, [(i + 1, i) for i in range(4)])
    sym = symbolic_factor(p, min_degree_order(p))
    assert sym.fill_count == 0


def test_arrowhead_hub_is_eliminated_at_the_end():
    p = SparsityPattern.from_entries(5, [(i, 0) for i in range(1, 5)])
    perm = min_degree_order(p)
    # once three leaves are gone the hub and the last leaf tie; lowest index wins
    assert 0 in perm.perm[-2:]
    assert symbolic_factor(p, perm).fill_count == 0


def test_diagonal_pattern_has_no_fill_for_any_order():
    p = SparsityPattern.from_entries(4, [])
    for perm in itertools.permutations(range(4)):
        assert symbolic_factor(p, Permutation(perm)).fill_count == 0


def test_four_cycle_minimum_fill_is_one():
    p = SparsityPattern.from_entries(4, [(1, 0), (2, 1), (3, 2), (3, 0)])
    fills = [elimination_fill(p, np.array(q)) for q in itertools.permutations(range(4))]
    assert min(fills) == 1
    for q, f in zip(itertools.permutations(range(4)), fills):
        assert symbolic_factor(p, Permutation(q)).fill_count == f == 1


def test_chain_lmi_pattern_fill_matches_elimination_game():
    sys = generate_instance(GeneratorConfig(N=10, seed=3))
    p = sparse_lmi(sys, 1.0).pattern
    perm = min_degree_order(p)
    assert symbolic_factor(p, perm).fill_count == elimination_fill(p, perm.perm)


def test_symbolic_factor_is_idempotent_and_checks_order():
    rng = np.random.default_rng(0)
    p = pattern_of(random_spd(rng, 12, 0.15))
    perm = min_degree_order(p)
    a, b = symbolic_factor(p, perm), symbolic_factor(p, perm)
    assert a.fill_count == b.fill_count
    assert np.array_equal(a.Li, b.Li)
    assert a.pattern.entries() >= p.permuted(perm).entries()
    with pytest.raises(ValueError):
        symbolic_factor(p, Permutation.identity(11))


def test_min_degree_is_deterministic():
    rng = np.random.default_rng(1)
    p = pattern_of(random_spd(rng, 40, 0.05))
    assert min_degree_order(p) == min_degree_order(p)


def test_two_by_two_closed_form():
    A = np.array([[4.0, 2.0], [2.0, 3.0]])
    p = pattern_of(A)
    f = cholesky(A, symbolic_factor(p, Permutation.identity(2)))
    assert np.allclose(f.L.toarray(), [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)


def test_identity_factor_is_identity():
    I = np.eye(6)
    f = cholesky(I, symbolic_factor(pattern_of(I), Permutation.identity(6)))
    assert np.array_equal(f.L.toarray(), I)


def test_indefinite_reports_failing_pivot():
    A = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefinite) as info:
        cholesky(A, symbolic_factor(pattern_of(A), Permutation.identity(2)))
    assert info.value.pivot == 1


def test_values_outside_pattern_are_rejected():
    sym = symbolic_factor(SparsityPattern.from_entries(3, []), Permutation.identity(3))
    A = np.eye(3)
    A[2, 0] = A[0, 2] = 0.1
    with pytest.raises(ValueError):
        cholesky(A, sym)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 40), density=st.floats(0.02, 1.0), seed=st.integers(0, 2**32 - 1))
def test_reconstruction_error(n, density, seed):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, n, density)
    p = pattern_of(A)
    perm = min_degree_order(p)
    f = cholesky(sp.csr_matrix(A), symbolic_factor(p, perm))
    L = f.L.toarray()
    B = np.empty_like(A)
    B[np.ix_(perm.perm, perm.perm)] = L @ L.T
    assert np.linalg.norm(B - A) <= 1e-10 * np.linalg.norm(A)
    assert np.all(f.diagonal > 0)


def test_solve_small_cases():
    I = np.eye(3)
    f = cholesky(I, symbolic_factor(pattern_of(I), Permutation.identity(3)))
    assert np.allclose(solve_with_factor(f, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    D = np.diag([4.0, 9.0])
    f = cholesky(D, symbolic_factor(pattern_of(D), Permutation.identity(2)))
    assert np.allclose(solve_with_factor(f, [4.0, 9.0]), [1.0, 1.0])
    with pytest.raises(ValueError):
        solve_with_factor(f, np.ones(3))


def test_solve_random_residual():
    rng = np.random.default_rng(7)
    A = random_spd(rng, 8)
    p = pattern_of(A)
    f = cholesky(A, symbolic_factor(p, min_degree_order(p)))
    b = rng.standard_normal(8)
    x = solve_with_factor(f, b)
    assert np.linalg.norm(A @ x - b) <= 1e-8 * np.linalg.norm(b)
    B = rng.standard_normal((8, 3))
    X = solve_with_factor(f, B)
    assert np.linalg.norm(A @ X - B) <= 1e-8 * np.linalg.norm(B)


def test_inverse_matches_dense():
    rng = np.random.default_rng(8)
    A = random_spd(rng, 15, 0.2)
    p = pattern_of(A)
    f = cholesky(A, symbolic_factor(p, min_degree_order(p)))
    assert np.allclose(f.inverse(), np.linalg.inv(A), atol=1e-12)


def test_log_det_small_cases():
    I = np.eye(7)
    f = cholesky(I, symbolic_factor(pattern_of(I), Permutation.identity(7)))
    assert log_det(f) == 0.0
    E = np.diag([np.e, np.e])
    f = cholesky(E, symbolic_factor(pattern_of(E), Permutation.identity(2)))
    assert log_det(f) == pytest.approx(2.0, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 50), seed=st.integers(0, 2**32 - 1))
def test_log_det_matches_eigenvalues(n, seed):
    rng = np.random.default_rng(seed)
    A = random_spd(rng, n, 0.3 if n > 5 else 1.0)
    p = pattern_of(A)
    f = cholesky(A, symbolic_factor(p, min_degree_order(p)))
    oracle = np.sum(np.log(np.linalg.eigvalsh(A)))
    assert abs(log_det(f) - oracle) <= 1e-9 * max(1.0, abs(oracle))


def random_tree_pattern(rng, n):
    parent = [int(rng.integers(i)) for i in range(1, n)]
    return SparsityPattern.from_entries(n, [(i, p) for i, p in zip(range(1, n), parent)])


def perfect_elimination_order(pattern):
    """Reverse maximum cardinality search."""
    adj = pattern.adjacency()
    n = pattern.order
    weight = np.zeros(n, dtype=int)
    seen = np.zeros(n, dtype=bool)
    order = []
    for _ in range(n):
        v = int(np.argmax(np.where(seen, -1, weight)))
        seen[v] = True
        order.append(v)
        for u in adj[v]:
            if not seen[u]:
                weight[u] += 1
    return Permutation(order[::-1])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2**32 - 1))
def test_chordal_patterns_have_zero_fill(n, seed):
    rng = np.random.default_rng(seed)
    tree = random_tree_pattern(rng, n)
    assert symbolic_factor(tree, perfect_elimination_order(tree)).fill_count == 0
    # interval graph: vertices are random intervals, edges where they overlap
    lo = rng.uniform(0, 1, n)
    hi = lo + rng.uniform(0, 0.3, n)
    entries = [(i, j) for i in range(n) for j in range(i)
               if lo[i] <= hi[j] and lo[j] <= hi[i]]
    interval = SparsityPattern.from_entries(n, entries)
    assert symbolic_factor(interval, perfect_elimination_order(interval)).fill_count == 0
