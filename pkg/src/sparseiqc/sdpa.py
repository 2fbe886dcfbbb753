"""SDPA sparse format (``.dat-s``) writer and reader.

Layout written by :func:`export_sdpa`::

    m
    nBlocks
    block sizes
    b
    matno blkno i j value     (1-based, upper triangle, matrix 0 is W)

Matrix 0 holds ``W`` and matrix ``i`` holds ``Q^i`` verbatim, so the file
describes ``W - sum_i y_i Q^i >= 0``. Finite variable bounds are appended as
a diagonal (LP) block of negative size: ``y_i >= lo`` becomes the row
``W = -lo, Q^i = -1`` and ``y_i <= hi`` the row ``W = hi, Q^i = 1``.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lmi import SdpFeasibilityProblem

__all__ = ["export_sdpa", "format_sdpa", "read_sdpa", "SdpaData"]


def _fmt(v) -> str:
    return repr(float(v))


def _bound_rows(problem: SdpFeasibilityProblem):
    """``(variable, w, q)`` per scalar bound row."""
    rows = []
    for i in range(problem.m):
        if np.isfinite(problem.lower[i]):
            rows.append((i, -problem.lower[i], -1.0))
        if np.isfinite(problem.upper[i]):
            rows.append((i, problem.upper[i], 1.0))
    return rows


def format_sdpa(problem: SdpFeasibilityProblem) -> str:
    """The ``.dat-s`` text of ``problem``."""
    p = problem.pattern
    bounds = _bound_rows(problem)
    sizes = [str(problem.order)] + ([str(-len(bounds))] if bounds else [])
    lines = [str(problem.m), str(len(sizes)), " ".join(sizes),
             " ".join(_fmt(v) for v in problem.b)]
    # upper triangle: the pattern stores row >= col
    order = np.lexsort((p.rows, p.cols))
    ii, jj = p.cols[order] + 1, p.rows[order] + 1

    def emit(matno, values):
        vals = values[order]
        for a, b, v in zip(ii[vals != 0], jj[vals != 0], vals[vals != 0]):
            lines.append(f"{matno} 1 {a} {b} {_fmt(v)}")

    emit(0, problem.w)
    lp_w = [(k + 1, w) for k, (_, w, _) in enumerate(bounds) if w != 0]
    for k, w in lp_w:
        lines.append(f"0 2 {k} {k} {_fmt(w)}")
    for i in range(problem.m):
        emit(i + 1, problem.coefficient_values(i))
        for k, (var, _, q) in enumerate(bounds):
            if var == i:
                lines.append(f"{i + 1} 2 {k + 1} {k + 1} {_fmt(q)}")
    return "\n".join(lines) + "\n"


def export_sdpa(problem: SdpFeasibilityProblem, destination) -> None:
    """Write ``problem`` to a path or text stream in SDPA sparse format.

    The normalization equality used by the margin solver is not part of the
    feasibility problem and is not written.
    """
    text = format_sdpa(problem)
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)


@dataclass
class SdpaData:
    """Parsed SDPA file.

    ``matrices[k][b]`` is matrix ``k`` (0 is the constant) restricted to
    block ``b`` as a full symmetric CSR matrix; LP blocks are diagonal.
    """

    m: int
    block_sizes: list
    b: np.ndarray
    matrices: list

    def to_problem(self) -> SdpFeasibilityProblem:
        """Rebuild a problem from one LMI block plus an optional bound block."""
        lmi = [k for k, s in enumerate(self.block_sizes) if s > 0]
        lp = [k for k, s in enumerate(self.block_sizes) if s < 0]
        if len(lmi) != 1 or len(lp) > 1:
            raise ValueError("expected one LMI block and at most one bound block")
        blk = lmi[0]
        W = self.matrices[0][blk]
        Qs = [self.matrices[i][blk] for i in range(1, self.m + 1)]
        lower = np.full(self.m, -np.inf)
        upper = np.full(self.m, np.inf)
        if lp:
            w = self.matrices[0][lp[0]].diagonal()
            coef = np.array([self.matrices[i][lp[0]].diagonal() for i in range(1, self.m + 1)])
            for row in range(w.size):
                (var,) = np.flatnonzero(coef[:, row])
                c = coef[var, row]
                if c < 0:
                    lower[var] = w[row] / c + 0.0
                else:
                    upper[var] = w[row] / c + 0.0
        return SdpFeasibilityProblem.from_matrices(W, Qs, lower=lower, upper=upper)


_SEPARATORS = re.compile(r"[,(){}]")


def _tokens(text):
    for line in text.splitlines():
        line = line.strip()
        if not line or line[0] in '"*':
            continue
        yield _SEPARATORS.sub(" ", line).split()


def read_sdpa(source) -> SdpaData:
    """Parse a ``.dat-s`` file from a path, a text stream or a string of file content."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            text = fh.read()
    elif isinstance(source, io.TextIOBase):
        text = source.read()
    else:
        text = str(source)
    lines = list(_tokens(text))
    m = int(lines[0][0])
    nblocks = int(lines[1][0])
    sizes = [int(float(s)) for s in lines[2][:nblocks]]
    rest = lines[3:]
    if m:
        b = np.array([float(v) for v in rest[0][:m]])
        entries = rest[1:]
    else:
        # an empty b line is dropped by the tokenizer
        b = np.zeros(0)
        entries = rest
    trip = {}
    for tok in entries:
        k, blk, i, j = (int(x) for x in tok[:4])
        trip.setdefault((k, blk - 1), []).append((i - 1, j - 1, float(tok[4])))
    matrices = []
    for k in range(m + 1):
        per_block = []
        for blk, s in enumerate(sizes):
            n = abs(s)
            items = trip.get((k, blk), [])
            if items:
                i, j, v = (np.array(x) for x in zip(*items))
                off = i != j
                rows = np.concatenate([i, j[off]])
                cols = np.concatenate([j, i[off]])
                vals = np.concatenate([v, v[off]])
                A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
            else:
                A = sp.csr_matrix((n, n))
            per_block.append(A)
        matrices.append(per_block)
    return SdpaData(m, sizes, b, matrices)
