"""Compiled inner loops for the simplicial Cholesky factorization.

All arrays follow CSparse conventions: ``Cp/Ci/Cx`` hold the upper triangle
(diagonal included) of the permuted matrix in compressed-column form, and
``Lp/Li/Lx`` hold the lower-triangular factor column by column with the
diagonal entry first in every column.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def chol_up(n, Cp, Ci, Cx, parent, Lp, Li, Lx):
    """Up-looking Cholesky. Returns -1 on success, else the failing pivot."""
    nxt = Lp[:n].copy()
    x = np.zeros(n)
    stack = np.empty(n, dtype=np.int64)
    flag = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        top = n
        flag[k] = k
        x[k] = 0.0
        for p in range(Cp[k], Cp[k + 1]):
            i = Ci[p]
            if i > k:
                continue
            x[i] += Cx[p]
            length = 0
            while flag[i] != k:
                stack[length] = i
                length += 1
                flag[i] = k
                i = parent[i]
            while length > 0:
                top -= 1
                length -= 1
                stack[top] = stack[length]
        d = x[k]
        x[k] = 0.0
        for idx in range(top, n):
            i = stack[idx]
            lki = x[i] / Lx[Lp[i]]
            x[i] = 0.0
            for p in range(Lp[i] + 1, nxt[i]):
                x[Li[p]] -= Lx[p] * lki
            d -= lki * lki
            p = nxt[i]
            nxt[i] += 1
            Li[p] = k
            Lx[p] = lki
        if not d > 0.0:
            return k
        p = nxt[k]
        nxt[k] += 1
        Li[p] = k
        Lx[p] = np.sqrt(d)
    return -1


@njit(cache=True)
def lsolve(Lp, Li, Lx, X):
    """Solve L Y = X in place; X is (n, k) C-contiguous."""
    n, k = X.shape
    for j in range(n):
        piv = Lx[Lp[j]]
        for r in range(k):
            X[j, r] /= piv
        for p in range(Lp[j] + 1, Lp[j + 1]):
            i = Li[p]
            v = Lx[p]
            for r in range(k):
                X[i, r] -= v * X[j, r]


@njit(cache=True)
def ltsolve(Lp, Li, Lx, X):
    """Solve L^T Y = X in place; X is (n, k) C-contiguous."""
    n, k = X.shape
    for j in range(n - 1, -1, -1):
        for p in range(Lp[j] + 1, Lp[j + 1]):
            i = Li[p]
            v = Lx[p]
            for r in range(k):
                X[j, r] -= v * X[i, r]
        piv = Lx[Lp[j]]
        for r in range(k):
            X[j, r] /= piv


@njit(cache=True)
def inverse_from_factor(Lp, Li, Lx):
    """Dense (L L^T)^{-1} using the sparsity of L^{-1} e_j below row j."""
    n = Lp.shape[0] - 1
    X = np.zeros((n, n))
    for c in range(n):
        X[c, c] = 1.0
    # forward solve column block by column block; rows above c stay zero
    for j in range(n):
        piv = Lx[Lp[j]]
        for r in range(j + 1):
            X[j, r] /= piv
        for p in range(Lp[j] + 1, Lp[j + 1]):
            i = Li[p]
            v = Lx[p]
            for r in range(j + 1):
                X[i, r] -= v * X[j, r]
    ltsolve(Lp, Li, Lx, X)
    return X


@njit(cache=True)
def row_dots(X, BT, rows, cols):
    """``out[p] = X[rows[p]] . BT[cols[p]]`` without gathering the rows."""
    n = X.shape[1]
    out = np.empty(rows.size)
    for p in range(rows.size):
        a = X[rows[p]]
        b = BT[cols[p]]
        s = 0.0
        for j in range(n):
            s += a[j] * b[j]
        out[p] = s
    return out
