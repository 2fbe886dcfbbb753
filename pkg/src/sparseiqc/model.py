"""Interconnected uncertain systems: subsystems, multipliers and interconnections."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .lti import StateSpaceSystem, interconnection_responses

__all__ = [
    "MultiplierKind",
    "IqcMultiplierSpec",
    "Subsystem",
    "InterconnectionMatrix",
    "InterconnectedSystem",
    "as_adjacency",
    "build_interconnection",
    "chain_interconnection",
    "path_adjacency",
    "well_posed",
    "diag_multiplier",
]

WELL_POSED_TOL = 1e-9


class MultiplierKind(str, enum.Enum):
    PARAMETRIC_SCALAR = "parametric_scalar"


@dataclass(frozen=True)
class IqcMultiplierSpec:
    """Uncertainty description of one subsystem.

    ``PARAMETRIC_SCALAR`` is the multiplier ``diag(r I, -r I)`` with a single
    nonnegative scalar ``r`` per frequency, valid for real parametric gains in
    ``[-1, 1]`` acting on a square channel of size ``dim``.
    """

    dim: int
    kind: MultiplierKind = MultiplierKind.PARAMETRIC_SCALAR

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("uncertainty channel must be nonempty")
        object.__setattr__(self, "kind", MultiplierKind(self.kind))


@dataclass(frozen=True, eq=False)
class Subsystem:
    """Four transfer blocks mapping ``(q, w)`` to ``(p, z)``."""

    pq: StateSpaceSystem
    pw: StateSpaceSystem
    zq: StateSpaceSystem
    zw: StateSpaceSystem
    uncertainty: IqcMultiplierSpec = None

    def __post_init__(self):
        d = self.pq.n_outputs
        if self.pq.n_inputs != d:
            raise ValueError("G_pq must be square")
        if self.pw.n_outputs != d or self.zq.n_inputs != d:
            raise ValueError("uncertainty channel sizes disagree across blocks")
        if self.zw.n_inputs != self.pw.n_inputs:
            raise ValueError("interconnection input sizes disagree (G_pw vs G_zw)")
        if self.zw.n_outputs != self.zq.n_outputs:
            raise ValueError("interconnection output sizes disagree (G_zq vs G_zw)")
        if self.uncertainty is None:
            object.__setattr__(self, "uncertainty", IqcMultiplierSpec(d))
        elif self.uncertainty.dim != d:
            raise ValueError("multiplier dimension does not match G_pq")

    @property
    def d(self) -> int:
        return self.pq.n_outputs

    @property
    def m(self) -> int:
        return self.pw.n_inputs

    @property
    def l(self) -> int:
        return self.zq.n_outputs

    def blocks(self):
        return {"pq": self.pq, "pw": self.pw, "zq": self.zq, "zw": self.zw}

    def replace(self, **blocks) -> "Subsystem":
        kw = self.blocks()
        kw.update(blocks)
        return Subsystem(uncertainty=self.uncertainty, **kw)


@dataclass(frozen=True, eq=False)
class InterconnectionMatrix:
    """Sparse ``w = Gamma z`` map between stacked subsystem channels.

    ``in_sizes[i]`` is the number of inputs ``m_i`` of subsystem i (rows of
    its block row) and ``out_sizes[j]`` the number of outputs ``l_j``. Each row
    has at most one nonzero. ``binary=False`` admits scaled entries, which is
    only useful for stress tests of the analysis.
    """

    matrix: sp.csr_matrix
    in_sizes: tuple
    out_sizes: tuple
    binary: bool = True

    def __post_init__(self):
        g = sp.csr_matrix(self.matrix, dtype=float)
        g.eliminate_zeros()
        ins = tuple(int(x) for x in self.in_sizes)
        outs = tuple(int(x) for x in self.out_sizes)
        if g.shape != (sum(ins), sum(outs)):
            raise ValueError(f"Gamma has shape {g.shape}, expected {(sum(ins), sum(outs))}")
        if g.shape[0] and np.any(np.diff(g.indptr) > 1):
            raise ValueError("each input may be driven by at most one output")
        if self.binary and np.any(g.data != 1.0):
            raise ValueError("Gamma entries must be 0 or 1")
        object.__setattr__(self, "matrix", g)
        object.__setattr__(self, "in_sizes", ins)
        object.__setattr__(self, "out_sizes", outs)

    @property
    def shape(self):
        return self.matrix.shape

    def block(self, i, j) -> np.ndarray:
        r0 = sum(self.in_sizes[:i])
        c0 = sum(self.out_sizes[:j])
        return self.matrix[r0 : r0 + self.in_sizes[i], c0 : c0 + self.out_sizes[j]].toarray()

    def norm(self) -> float:
        """Largest singular value."""
        g = self.matrix
        if g.nnz == 0:
            return 0.0
        gram = (g.T @ g).tocoo()
        if np.all(gram.row == gram.col):
            return float(np.sqrt(gram.data.max()))
        return float(np.linalg.norm(g.toarray(), 2))

    def scaled(self, alpha: float) -> "InterconnectionMatrix":
        return InterconnectionMatrix(alpha * self.matrix, self.in_sizes, self.out_sizes,
                                     binary=False)


@dataclass(frozen=True, eq=False)
class InterconnectedSystem:
    subsystems: tuple
    interconnection: InterconnectionMatrix
    adjacency: np.ndarray | None = None

    def __post_init__(self):
        subs = tuple(self.subsystems)
        object.__setattr__(self, "subsystems", subs)
        g = self.interconnection
        if len(g.in_sizes) != len(subs):
            raise ValueError("Gamma partition does not match the number of subsystems")
        for i, s in enumerate(subs):
            if g.in_sizes[i] != s.m or g.out_sizes[i] != s.l:
                raise ValueError(f"Gamma partition disagrees with subsystem {i} channels")

    @property
    def N(self) -> int:
        return len(self.subsystems)

    @property
    def d_sizes(self) -> list[int]:
        return [s.d for s in self.subsystems]

    @property
    def d_total(self) -> int:
        return sum(self.d_sizes)

    @property
    def m_total(self) -> int:
        return sum(s.m for s in self.subsystems)

    @property
    def l_total(self) -> int:
        return sum(s.l for s in self.subsystems)

    @property
    def specs(self) -> list[IqcMultiplierSpec]:
        return [s.uncertainty for s in self.subsystems]

    def with_interconnection(self, gamma: InterconnectionMatrix) -> "InterconnectedSystem":
        return InterconnectedSystem(self.subsystems, gamma, self.adjacency)

    def with_subsystems(self, subsystems) -> "InterconnectedSystem":
        return InterconnectedSystem(tuple(subsystems), self.interconnection, self.adjacency)


def as_adjacency(a) -> np.ndarray:
    """Validate a symmetric 0-1 adjacency matrix with zero diagonal."""
    A = np.asarray(a.toarray() if sp.issparse(a) else a)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("adjacency entries must be 0 or 1")
    if np.any(np.diag(A)):
        raise ValueError("adjacency must have a zero diagonal")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    return A.astype(np.int8)


def path_adjacency(N: int) -> np.ndarray:
    A = np.zeros((N, N), dtype=np.int8)
    idx = np.arange(N - 1)
    A[idx, idx + 1] = 1
    A[idx + 1, idx] = 1
    return A


def build_interconnection(adjacency) -> InterconnectionMatrix:
    """Interconnection from a graph; node i gets ``degree(i)`` inputs and outputs.

    Edges are visited row by row; each edge ``(i, j)`` feeds the next unused
    output of j into the next unused input of i.
    """
    A = as_adjacency(adjacency)
    N = A.shape[0]
    deg = A.sum(axis=1).astype(int)
    offset = np.concatenate([[0], np.cumsum(deg)])
    next_in = np.zeros(N, dtype=int)
    next_out = np.zeros(N, dtype=int)
    rows, cols = [], []
    for i in range(N):
        for j in np.flatnonzero(A[i]):
            rows.append(offset[i] + next_in[i])
            cols.append(offset[j] + next_out[j])
            next_in[i] += 1
            next_out[j] += 1
    total = int(offset[-1])
    g = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(total, total))
    return InterconnectionMatrix(g, tuple(deg), tuple(deg))


def chain_interconnection(N: int) -> InterconnectionMatrix:
    """Chain topology: end subsystems have one channel, interior ones two.

    Interior subsystem i reads ``w^i_1 = z^{i-1}_2`` and ``w^i_2 = z^{i+1}_1``.
    """
    if N < 2:
        raise ValueError("a chain needs at least two subsystems")
    sizes = [1] + [2] * (N - 2) + [1]
    off = np.concatenate([[0], np.cumsum(sizes)])
    rows, cols = [], []
    for i in range(N):
        if i > 0:
            rows.append(off[i])
            cols.append(off[i - 1] + sizes[i - 1] - 1)
        if i < N - 1:
            rows.append(off[i] + sizes[i] - 1)
            cols.append(off[i + 1])
    n = int(off[-1])
    g = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return InterconnectionMatrix(g, tuple(sizes), tuple(sizes))


def well_posed(sys: InterconnectedSystem, grid) -> bool:
    """Whether ``I - Gamma G_zw(j omega)`` stays uniformly invertible on the grid."""
    gamma = sys.interconnection.matrix
    if gamma.nnz == 0:
        return True
    for w in grid:
        *_, Gzw = interconnection_responses(sys, w)
        M = np.eye(gamma.shape[0]) - gamma @ Gzw
        if np.linalg.svd(M, compute_uv=False).min() <= WELL_POSED_TOL:
            return False
    return True


def diag_multiplier(specs: Sequence[IqcMultiplierSpec], values) -> np.ndarray:
    """Stacked multiplier ``[[diag(r_i I), 0], [0, diag(-r_i I)]]`` of order 2 d-bar."""
    r = np.asarray(values, dtype=float)
    if r.shape != (len(specs),):
        raise ValueError("need one multiplier value per subsystem")
    if np.any(r < 0):
        raise ValueError("multiplier values must be nonnegative")
    for s in specs:
        if s.kind is not MultiplierKind.PARAMETRIC_SCALAR:
            raise NotImplementedError(f"multiplier kind {s.kind}")
    diag = np.repeat(r, [s.dim for s in specs])
    return np.diag(np.concatenate([diag, -diag]))
