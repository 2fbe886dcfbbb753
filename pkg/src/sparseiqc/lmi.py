"""Per-frequency robustness LMIs in dual standard form.

A problem stores ``W`` and the coefficient matrices ``Q^1..Q^m`` of

    sum_i y_i Q^i + S = W,   S >= 0,

as values on one aggregate lower-triangular sparsity pattern. Complex
Hermitian data is mapped to real symmetric data with :func:`real_embed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .linalg_sparse import SparsityPattern
from .lti import freq_response, lumped_response

__all__ = [
    "SdpFeasibilityProblem",
    "default_eps",
    "to_dual_form",
    "real_embed",
    "embedded_pattern",
    "lumped_lmi",
    "sparse_lmi",
]

EPS_REL = 1e-6
HERMITIAN_TOL = 1e-12
_DENSE_COEFFS = 0.3
X_MAX = 1e4


def default_eps(constant=None) -> float:
    """Strictness margin ``1e-6 (1 + max|F0|)``."""
    if constant is None:
        return EPS_REL
    c = constant.data if sp.issparse(constant) else np.asarray(constant)
    scale = float(np.abs(c).max()) if c.size else 0.0
    return EPS_REL * (1.0 + scale)


def _lower_triplets(a):
    if sp.issparse(a):
        coo = sp.coo_matrix(a)
        keep = (coo.row >= coo.col) & (coo.data != 0)
        return coo.row[keep], coo.col[keep], coo.data[keep].astype(float)
    a = np.asarray(a, dtype=float)
    r, c = np.nonzero(np.tril(a))
    return r, c, a[r, c]


def _check_symmetric(a, name):
    if sp.issparse(a):
        diff = abs(a - a.T)
        bad = diff.max() if diff.nnz else 0.0
        scale = abs(a).max() if a.nnz else 0.0
    else:
        a = np.asarray(a)
        bad = np.abs(a - a.T).max() if a.size else 0.0
        scale = np.abs(a).max() if a.size else 0.0
    if bad > 1e-10 * max(1.0, scale):
        raise ValueError(f"{name} is not symmetric")


@dataclass(frozen=True, eq=False)
class SdpFeasibilityProblem:
    """Dual-form SDP data on a shared sparsity pattern.

    Attributes
    ----------
    pattern : SparsityPattern
        Aggregate pattern, the union of the patterns of ``W`` and every ``Q^i``.
    w : ndarray
        Values of ``W`` on ``pattern`` (lower triangle, pattern order).
    coeffs : ndarray or scipy.sparse.csr_matrix
        ``(m, nnz)`` array; row ``i`` holds ``Q^i`` on ``pattern``.
    labels : tuple of str
        One name per variable.
    lower, upper : ndarray
        Box bounds on the variables (``-inf``/``inf`` when absent). Bounds
        enter the solver as extra 1x1 cone blocks.
    normalization : ndarray or None
        Weights ``a`` of the equality ``a . y = 1``. Homogeneous LMIs use it
        to fix the scale of the multipliers.
    omega : float
        Frequency tag (``nan`` for problems not tied to a frequency).
    eps : float
        Strictness margin already folded into ``W``.
    form : str
        ``"lumped"``, ``"sparse"`` or ``"generic"``.
    hermitian_order : int or None
        Order of the complex LMI before real embedding.
    """

    pattern: SparsityPattern
    w: np.ndarray
    coeffs: object
    labels: tuple
    lower: np.ndarray = None
    upper: np.ndarray = None
    omega: float = math.nan
    eps: float = 0.0
    form: str = "generic"
    hermitian_order: int | None = None
    normalization: np.ndarray | None = None

    def __post_init__(self):
        nnz = self.pattern.nnz
        w = np.asarray(self.w, dtype=float)
        if w.shape != (nnz,):
            raise ValueError("W values do not match the pattern")
        c = self.coeffs
        if sp.issparse(c):
            c = sp.csr_matrix(c, dtype=float)
        else:
            c = np.asarray(c, dtype=float).reshape(-1, nnz)
        if c.shape[1] != nnz:
            raise ValueError("coefficient rows do not match the pattern")
        m = c.shape[0]
        labels = tuple(self.labels) if self.labels is not None else tuple(f"y{i + 1}" for i in range(m))
        if len(labels) != m:
            raise ValueError("need one label per variable")
        lo = np.full(m, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.full(m, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lo.shape != (m,) or hi.shape != (m,) or np.any(lo >= hi):
            raise ValueError("invalid variable bounds")
        for name, val in (("w", w), ("coeffs", c), ("labels", labels), ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, val)
        if self.normalization is not None:
            a = np.asarray(self.normalization, dtype=float)
            if a.shape != (m,) or not np.any(a):
                raise ValueError("normalization needs one nonzero weight vector of length m")
            object.__setattr__(self, "normalization", a)

    @classmethod
    def from_matrices(cls, W, Qs, labels=None, lower=None, upper=None, pattern=None, **kw):
        """Build from explicit symmetric matrices (dense or sparse).

        ``pattern`` adds structural entries to the aggregate pattern.
        """
        if sp.issparse(W):
            n = W.shape[0]
        else:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            n = W.shape[0]
        mats = [W, *Qs]
        for k, a in enumerate(mats):
            if a.shape != (n, n):
                raise ValueError("all matrices must share one order")
            _check_symmetric(a, "W" if k == 0 else f"Q^{k}")
        trip = [_lower_triplets(a) for a in mats]
        found = SparsityPattern(
            n,
            np.concatenate([t[0] for t in trip]),
            np.concatenate([t[1] for t in trip]),
        )
        pattern = found if pattern is None else found.union(pattern)
        w = np.zeros(pattern.nnz)
        r, c, v = trip[0]
        w[pattern.locate(r, c)] = v
        rows, cols, vals = [], [], []
        for k, (r, c, v) in enumerate(trip[1:]):
            rows.append(np.full(r.size, k))
            cols.append(pattern.locate(r, c))
            vals.append(v)
        m = len(Qs)
        if m:
            coeffs = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(m, pattern.nnz),
            )
            if coeffs.nnz > _DENSE_COEFFS * m * pattern.nnz:
                coeffs = coeffs.toarray()
        else:
            coeffs = np.zeros((0, pattern.nnz))
        return cls(pattern, w, coeffs, labels, lower, upper, **kw)

    @property
    def order(self) -> int:
        return self.pattern.order

    @property
    def m(self) -> int:
        return self.coeffs.shape[0]

    @property
    def nnz(self) -> int:
        return self.pattern.nnz

    @property
    def b(self) -> np.ndarray:
        return np.zeros(self.m)

    @cached_property
    def offdiag_weight(self) -> np.ndarray:
        """1 on the diagonal, 2 elsewhere, so ``<A, B> = sum(weight * a * b)``."""
        return np.where(self.pattern.rows == self.pattern.cols, 1.0, 2.0)

    def to_matrix(self, values) -> sp.csc_matrix:
        """Symmetric sparse matrix from values on the pattern."""
        p = self.pattern
        lower = sp.csc_matrix((values, (p.rows, p.cols)), shape=(p.order, p.order))
        strict = sp.csc_matrix(
            (np.where(p.rows != p.cols, values, 0.0), (p.rows, p.cols)), shape=lower.shape
        )
        return (lower + strict.T).tocsc()

    def coefficient_values(self, i) -> np.ndarray:
        c = self.coeffs
        return c[i].toarray().ravel() if sp.issparse(c) else c[i].copy()

    @property
    def W(self) -> sp.csc_matrix:
        return self.to_matrix(self.w)

    def Q(self, i) -> sp.csc_matrix:
        return self.to_matrix(self.coefficient_values(i))

    @property
    def Qs(self) -> list:
        return [self.Q(i) for i in range(self.m)]

    def slack_values(self, y, t=0.0) -> np.ndarray:
        """``W - sum y_i Q^i - t I`` on the pattern."""
        y = np.asarray(y, dtype=float)
        s = self.w - (self.coeffs.T @ y if self.m else 0.0)
        if t:
            s = s - t * (self.pattern.rows == self.pattern.cols)
        return np.asarray(s, dtype=float).ravel()

    def lmi_value(self, y) -> np.ndarray:
        """Dense ``F(y) = sum y_i Q^i - W - eps I``, the original affine map."""
        s = self.slack_values(y)
        return -self.to_matrix(s).toarray() - self.eps * np.eye(self.order)

    def support(self, i) -> np.ndarray:
        """Row/column indices touched by ``Q^i``."""
        c = self.coeffs
        if sp.issparse(c):
            idx = c.indices[c.indptr[i] : c.indptr[i + 1]]
        else:
            idx = np.flatnonzero(c[i])
        return np.unique(np.concatenate([self.pattern.rows[idx], self.pattern.cols[idx]]))


def to_dual_form(constant, coefficients, eps=None, **kw) -> SdpFeasibilityProblem:
    """Rewrite ``F(y) = F0 + sum y_i F_i <= -eps I`` as dual-form data.

    ``W = -eps I - F0`` and ``Q^i = F_i``. ``eps`` defaults to
    ``1e-6 (1 + max|F0|)``.
    """
    if eps is None:
        eps = default_eps(constant)
    n = constant.shape[0]
    if sp.issparse(constant):
        W = (-eps * sp.identity(n, format="csr") - constant).tocsr()
    else:
        W = -eps * np.eye(n) - np.asarray(constant, dtype=float)
    return SdpFeasibilityProblem.from_matrices(W, list(coefficients), eps=eps, **kw)


def real_embed(H):
    """``[[Re H, -Im H], [Im H, Re H]]`` for a complex Hermitian H.

    The spectrum of the result is that of H with every multiplicity doubled.
    Sparse input gives a sparse CSR result.
    """
    if sp.issparse(H):
        H = sp.csr_matrix(H)
        diff = abs(H - H.conj().T)
        bad = diff.max() if diff.nnz else 0.0
        scale = abs(H).max() if H.nnz else 0.0
        if bad > HERMITIAN_TOL * max(1.0, scale):
            raise ValueError("matrix is not Hermitian")
        re = sp.csr_matrix(H.real)
        im = sp.csr_matrix(H.imag)
        re.eliminate_zeros()
        im.eliminate_zeros()
        return sp.bmat([[re, -im], [im, re]], format="csr")
    H = np.atleast_2d(np.asarray(H))
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    scale = np.abs(H).max() if H.size else 0.0
    if H.size and np.abs(H - H.conj().T).max() > HERMITIAN_TOL * max(1.0, scale):
        raise ValueError("matrix is not Hermitian")
    re, im = H.real.astype(float), H.imag.astype(float)
    return np.block([[re, -im], [im, re]])


def embedded_pattern(mats) -> SparsityPattern:
    """Pattern of the real embedding with every complex entry replicated as a 2x2 block.

    Keeping ``(n+i, i)`` even where ``Im H_ii = 0`` preserves chordality of
    the complex pattern, so the embedding factors without extra fill.
    """
    mats = list(mats)
    n = mats[0].shape[0]
    rows, cols = [np.arange(n)], [np.arange(n)]
    for H in mats:
        coo = sp.coo_matrix(H)
        keep = (coo.row >= coo.col) & (coo.data != 0)
        rows.append(coo.row[keep])
        cols.append(coo.col[keep])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return SparsityPattern(
        2 * n,
        np.concatenate([r, r + n, r + n, c + n]),
        np.concatenate([c, c + n, c, r]),
    )


def _hermitian_part(H):
    return 0.5 * (H + H.conj().T)


def _channel_slices(sizes):
    off = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    return [slice(off[i], off[i + 1]) for i in range(len(sizes))]


def _simplex(m, scaling=False):
    # the LMIs are homogeneous, so fixing sum(r) = 1 loses nothing and keeps t* finite;
    # x stays outside the sum (else r -> 0 drives the margin to zero) and gets a cap
    lower = np.zeros(m)
    upper = np.full(m, np.inf)
    weights = np.ones(m)
    if scaling:
        upper[-1] = X_MAX
        weights[-1] = 0.0
    return {"lower": lower, "upper": upper, "normalization": weights}


def lumped_lmi(sys, omega: float, eps=None) -> SdpFeasibilityProblem:
    """Lumped robustness LMI at one frequency, variables ``r_1..r_N``.

    With ``Gbar`` the lumped response and ``I_i`` the uncertainty channels of
    subsystem i, ``F(r) = sum_i r_i (Gbar[I_i]^* Gbar[I_i] - E_i)`` must satisfy
    ``F(r) <= -eps I``. Raises ``IllPosedInterconnection`` if the interconnection
    cannot be eliminated at ``omega``.
    """
    G = lumped_response(sys, omega)
    d = G.shape[0]
    herm = []
    for sl in _channel_slices(sys.d_sizes):
        rows = G[sl]
        M = rows.conj().T @ rows
        M[np.arange(sl.start, sl.stop), np.arange(sl.start, sl.stop)] -= 1.0
        herm.append(_hermitian_part(M))
    mats = [real_embed(H) for H in herm]
    return to_dual_form(
        np.zeros((2 * d, 2 * d)), mats, eps=eps, pattern=embedded_pattern(herm),
        labels=[f"r{i + 1}" for i in range(len(mats))],
        **_simplex(len(mats)), omega=float(omega), form="lumped", hermitian_order=d,
    )


def _stacked_blocks(sys, omega):
    """Sparse block-diagonal responses placed in ``[q; w]`` column coordinates."""
    d_sizes = sys.d_sizes
    m_sizes = [s.m for s in sys.subsystems]
    l_sizes = [s.l for s in sys.subsystems]
    dbar, mbar, lbar = sum(d_sizes), sum(m_sizes), sum(l_sizes)
    qs, ws, zs = _channel_slices(d_sizes), _channel_slices(m_sizes), _channel_slices(l_sizes)
    P = sp.lil_matrix((dbar, dbar + mbar), dtype=complex)
    Z = sp.lil_matrix((lbar, dbar + mbar), dtype=complex)
    for i, sub in enumerate(sys.subsystems):
        q, w, z = qs[i], ws[i], zs[i]
        wq = slice(dbar + w.start, dbar + w.stop)
        P[q, q] = freq_response(sub.pq, omega)
        if sub.m:
            P[q, wq] = freq_response(sub.pw, omega)
        if sub.l:
            Z[z, q] = freq_response(sub.zq, omega)
            if sub.m:
                Z[z, wq] = freq_response(sub.zw, omega)
    return P.tocsr(), Z.tocsr(), qs


def sparse_lmi(sys, omega: float, eps=None) -> SdpFeasibilityProblem:
    """Sparse robustness LMI at one frequency, variables ``r_1..r_N`` and ``x``.

    The interconnection is kept as a constraint on ``[q; w]``:

        F(r, x) = sum_i r_i (P_i^* P_i - E_i) - x M^* M,

    where ``P_i`` is the block row of ``[G_pq G_pw]`` for subsystem i and
    ``M = [-Gamma G_zq, I - Gamma G_zw]``. Nothing is inverted, so the
    problem is built even when the interconnection is ill posed.
    """
    P, Z, qs = _stacked_blocks(sys, omega)
    dbar = P.shape[0]
    mbar = sys.m_total
    n = dbar + mbar
    gamma = sp.csr_matrix(sys.interconnection.matrix, dtype=complex)
    eye_w = sp.hstack([sp.csr_matrix((mbar, dbar)), sp.identity(mbar, format="csr")])
    M = (eye_w - gamma @ Z).tocsr()
    herm = []
    for q in qs:
        Pi = P[q]
        Ei = sp.csr_matrix(
            (np.ones(q.stop - q.start), (np.arange(q.start, q.stop), np.arange(q.start, q.stop))),
            shape=(n, n),
        )
        herm.append(_hermitian_part(Pi.conj().T @ Pi - Ei))
    herm.append(_hermitian_part(-(M.conj().T @ M)))
    mats = [real_embed(H) for H in herm]
    labels = [f"r{i + 1}" for i in range(len(qs))] + ["x"]
    return to_dual_form(
        sp.csr_matrix((2 * n, 2 * n)), mats, eps=eps, labels=labels,
        pattern=embedded_pattern(herm),
        **_simplex(len(mats), scaling=True), omega=float(omega), form="sparse", hermitian_order=n,
    )
