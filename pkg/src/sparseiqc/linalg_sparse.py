"""Sparse symmetric patterns, minimum-degree ordering and simplicial Cholesky.

Patterns store the lower triangle (``row >= col``) with the full diagonal.
A :class:`Permutation` ``p`` reorders a matrix as ``C = A[p][:, p]``, i.e.
position ``k`` of the factorization holds original vertex ``p[k]``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _kernels

__all__ = [
    "SparsityPattern",
    "Permutation",
    "SymbolicFactor",
    "CholeskyFactor",
    "NotPositiveDefinite",
    "min_degree_order",
    "symbolic_factor",
    "cholesky",
    "solve_with_factor",
    "log_det",
]


class NotPositiveDefinite(ArithmeticError):
    """Raised when a pivot of the factorization is not strictly positive.

    ``pivot`` is the elimination step that failed and ``index`` the original
    row/column it corresponds to.
    """

    def __init__(self, pivot: int, index: int):
        super().__init__(f"matrix is not positive definite (pivot {pivot}, index {index})")
        self.pivot = pivot
        self.index = index


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Lower-triangular nonzero pattern of a symmetric ``order x order`` matrix.

    Entries are kept sorted column-major (by ``col`` then ``row``) and always
    contain the full diagonal.
    """

    order: int
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        n = int(self.order)
        if n <= 0:
            raise ValueError("pattern order must be positive")
        r = np.asarray(self.rows, dtype=np.int64).ravel()
        c = np.asarray(self.cols, dtype=np.int64).ravel()
        if r.shape != c.shape:
            raise ValueError("rows and cols must have equal length")
        if r.size and (r.min() < 0 or c.min() < 0 or r.max() >= n or c.max() >= n):
            raise ValueError("pattern index out of range")
        lo = np.minimum(r, c)
        hi = np.maximum(r, c)
        diag = np.arange(n, dtype=np.int64)
        keys = np.unique(np.concatenate([lo * n + hi, diag * n + diag]))
        object.__setattr__(self, "order", n)
        object.__setattr__(self, "cols", keys // n)
        object.__setattr__(self, "rows", keys % n)

    @classmethod
    def from_entries(cls, order, entries):
        entries = list(entries)
        if not entries:
            return cls(order, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        r, c = zip(*entries)
        return cls(order, np.array(r), np.array(c))

    @classmethod
    def from_matrix(cls, a) -> "SparsityPattern":
        """Pattern of the nonzeros of a (symmetric) dense or sparse matrix."""
        if sp.issparse(a):
            coo = sp.coo_matrix(a)
            keep = coo.data != 0
            return cls(a.shape[0], coo.row[keep], coo.col[keep])
        a = np.asarray(a)
        r, c = np.nonzero(a)
        return cls(a.shape[0], r, c)

    @classmethod
    def dense(cls, order) -> "SparsityPattern":
        r, c = np.tril_indices(order)
        return cls(order, r, c)

    def union(self, other: "SparsityPattern") -> "SparsityPattern":
        if other.order != self.order:
            raise ValueError("pattern orders differ")
        return SparsityPattern(
            self.order,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
        )

    @property
    def nnz(self) -> int:
        """Number of stored (lower-triangular) entries."""
        return int(self.rows.size)

    @property
    def density(self) -> float:
        """Fraction of the full ``n x n`` matrix that is structurally nonzero."""
        n = self.order
        offdiag = self.nnz - n
        return (n + 2 * offdiag) / float(n * n)

    def entries(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    @cached_property
    def keys(self) -> np.ndarray:
        """Sorted linear keys ``col * order + row`` used for lookups."""
        return self.cols * self.order + self.rows

    def locate(self, rows, cols) -> np.ndarray:
        """Positions of the given (symmetrized) entries; -1 if absent."""
        r = np.asarray(rows, dtype=np.int64)
        c = np.asarray(cols, dtype=np.int64)
        k = np.minimum(r, c) * self.order + np.maximum(r, c)
        pos = np.searchsorted(self.keys, k)
        pos = np.minimum(pos, self.keys.size - 1)
        return np.where(self.keys[pos] == k, pos, -1)

    def adjacency(self) -> list[set[int]]:
        adj = [set() for _ in range(self.order)]
        off = self.rows != self.cols
        for r, c in zip(self.rows[off].tolist(), self.cols[off].tolist()):
            adj[r].add(c)
            adj[c].add(r)
        return adj

    def permuted(self, perm: "Permutation") -> "SparsityPattern":
        inv = perm.inverse
        return SparsityPattern(self.order, inv[self.rows], inv[self.cols])


@dataclass(frozen=True, eq=False)
class Permutation:
    perm: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64).ravel()
        if not np.array_equal(np.sort(p), np.arange(p.size)):
            raise ValueError("not a permutation")
        object.__setattr__(self, "perm", p)

    @classmethod
    def identity(cls, n) -> "Permutation":
        return cls(np.arange(n))

    @property
    def order(self) -> int:
        return int(self.perm.size)

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())


@dataclass(frozen=True, eq=False)
class SymbolicFactor:
    """Filled pattern of ``L + L^T`` for a given input pattern and ordering.

    ``pattern`` is expressed in the permuted numbering; ``Lp`` and ``Li`` are
    the compressed columns of L (diagonal first). ``scatter`` maps the entries
    of ``input_pattern`` onto the upper-triangular storage consumed by the
    numeric factorization.
    """

    pattern: SparsityPattern
    permutation: Permutation
    fill_count: int
    input_pattern: SparsityPattern
    parent: np.ndarray
    Lp: np.ndarray
    Li: np.ndarray
    Cp: np.ndarray = field(repr=False)
    Ci: np.ndarray = field(repr=False)
    scatter: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return self.pattern.order

    @property
    def nnz(self) -> int:
        return int(self.Lp[-1])

    @property
    def fill_ratio(self) -> float:
        """Fill entries as a fraction of the filled lower triangle."""
        return self.fill_count / float(self.nnz)


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    symbolic: SymbolicFactor
    Lx: np.ndarray

    @property
    def order(self) -> int:
        return self.symbolic.order

    @property
    def L(self) -> sp.csc_matrix:
        """Lower-triangular factor of the permuted matrix."""
        s = self.symbolic
        n = s.order
        return sp.csc_matrix((self.Lx, s.Li, s.Lp), shape=(n, n))

    @property
    def diagonal(self) -> np.ndarray:
        return self.Lx[self.symbolic.Lp[:-1]]

    def inverse(self) -> np.ndarray:
        """Dense inverse of the factored matrix in the original numbering."""
        s = self.symbolic
        xp = _kernels.inverse_from_factor(s.Lp, s.Li, self.Lx)
        inv = s.permutation.inverse
        return xp[np.ix_(inv, inv)]


def min_degree_order(pattern: SparsityPattern) -> Permutation:
    """Minimum-degree ordering on the explicit elimination graph.

    Ties are broken by the smallest original vertex index, so the result is a
    pure function of the pattern.
    """
    n = pattern.order
    adj = pattern.adjacency()
    heap = [(len(adj[v]), v) for v in range(n)]
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    order = []
    while heap:
        deg, v = heapq.heappop(heap)
        if done[v] or deg != len(adj[v]):
            continue
        done[v] = True
        order.append(v)
        nbrs = adj[v]
        for u in nbrs:
            au = adj[u]
            au.discard(v)
            au |= nbrs
            au.discard(u)
            heapq.heappush(heap, (len(au), u))
        adj[v] = set()
    return Permutation(np.array(order, dtype=np.int64))


def symbolic_factor(pattern: SparsityPattern, perm: Permutation) -> SymbolicFactor:
    """Column structure of L from the elimination tree of ``pattern`` under ``perm``."""
    n = pattern.order
    if perm.order != n:
        raise ValueError(f"permutation order {perm.order} != pattern order {n}")
    inv = perm.inverse
    pr = inv[pattern.rows]
    pc = inv[pattern.cols]
    lo = np.minimum(pr, pc)
    hi = np.maximum(pr, pc)

    below = [set() for _ in range(n)]
    off = lo != hi
    for a, b in zip(lo[off].tolist(), hi[off].tolist()):
        below[a].add(b)

    parent = np.full(n, -1, dtype=np.int64)
    children = [[] for _ in range(n)]
    struct = [None] * n
    for j in range(n):
        s = below[j]
        for ch in children[j]:
            s |= struct[ch]
        s.discard(j)
        struct[j] = s
        if s:
            p = min(s)
            parent[j] = p
            children[p].append(j)
    counts = np.array([1 + len(s) for s in struct], dtype=np.int64)
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=Lp[1:])
    Li = np.empty(Lp[-1], dtype=np.int64)
    for j in range(n):
        Li[Lp[j]] = j
        Li[Lp[j] + 1 : Lp[j + 1]] = sorted(struct[j])
    col_of = np.repeat(np.arange(n), counts)
    filled = SparsityPattern(n, Li, col_of)
    fill_count = filled.nnz - pattern.nnz

    # upper-triangular CSC of the permuted input, entry k of the pattern -> slot
    ukeys = hi * n + lo
    order = np.argsort(ukeys, kind="stable")
    Ci = lo[order]
    Cp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(hi, minlength=n), out=Cp[1:])
    return SymbolicFactor(
        pattern=filled,
        permutation=perm,
        fill_count=int(fill_count),
        input_pattern=pattern,
        parent=parent,
        Lp=Lp,
        Li=Li,
        Cp=Cp,
        Ci=Ci.astype(np.int64),
        scatter=order.astype(np.int64),
    )


def _values_on_pattern(values, pattern: SparsityPattern) -> np.ndarray:
    if isinstance(values, np.ndarray) and values.ndim == 1:
        if values.size != pattern.nnz:
            raise ValueError("value vector does not match the pattern")
        return values.astype(float, copy=False)
    if sp.issparse(values):
        coo = sp.coo_matrix(values)
        keep = (coo.row >= coo.col) & (coo.data != 0)
        r, c, v = coo.row[keep], coo.col[keep], coo.data[keep]
    else:
        a = np.asarray(values, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        r, c = np.nonzero(np.tril(a))
        v = a[r, c]
    if r.size and max(r.max(), c.max()) >= pattern.order:
        raise ValueError("matrix order exceeds pattern order")
    pos = pattern.locate(r, c)
    if np.any(pos < 0):
        raise ValueError("matrix has nonzeros outside the symbolic pattern")
    out = np.zeros(pattern.nnz)
    np.add.at(out, pos, v)
    return out


def cholesky(values, symbolic: SymbolicFactor) -> CholeskyFactor:
    """Numeric factorization ``P^T A P = L L^T`` on a precomputed structure.

    ``values`` may be a dense or sparse symmetric matrix (its lower triangle is
    read) or a 1-D array aligned with ``symbolic.input_pattern`` entries.
    Raises :class:`NotPositiveDefinite` when a pivot is not positive.
    """
    v = _values_on_pattern(values, symbolic.input_pattern)
    return _factor_values(v, symbolic)


def _factor_values(v: np.ndarray, symbolic: SymbolicFactor) -> CholeskyFactor:
    s = symbolic
    Cx = np.ascontiguousarray(v[s.scatter])
    Lx = np.empty(s.Lp[-1])
    Li = s.Li.copy()
    k = _kernels.chol_up(s.order, s.Cp, s.Ci, Cx, s.parent, s.Lp, Li, Lx)
    if k >= 0:
        raise NotPositiveDefinite(int(k), int(s.permutation.perm[k]))
    return CholeskyFactor(s, Lx)


def solve_with_factor(factor: CholeskyFactor, rhs) -> np.ndarray:
    """Solve ``A X = rhs`` for a vector or (n, k) matrix right-hand side."""
    s = factor.symbolic
    b = np.asarray(rhs, dtype=float)
    vector = b.ndim == 1
    if b.shape[0] != s.order:
        raise ValueError(f"rhs has {b.shape[0]} rows, factor order is {s.order}")
    p = s.permutation.perm
    X = np.ascontiguousarray(b[p].reshape(s.order, -1))
    _kernels.lsolve(s.Lp, s.Li, factor.Lx, X)
    _kernels.ltsolve(s.Lp, s.Li, factor.Lx, X)
    out = np.empty_like(X)
    out[p] = X
    return out.ravel() if vector else out


def log_det(factor: CholeskyFactor) -> float:
    """``log det A = 2 sum log L_jj``."""
    return float(2.0 * np.sum(np.log(factor.diagonal)))
