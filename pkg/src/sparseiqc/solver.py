"""Barrier path-following solver for the margin form of a dual SDP.

Given dual-form data the solver computes

    t* = max { t : W - sum_i y_i Q^i - t I >= 0,  lower <= y <= upper }

by minimizing ``-tau t - log det S - sum log(bound slacks)`` for an
increasing sequence of ``tau``. The slack ``S`` is factored either densely
(LAPACK) or with the sparse Cholesky of :mod:`sparseiqc.linalg_sparse` on the
aggregate pattern; both share the Newton-system assembly.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .linalg_sparse import (
    CholeskyFactor,
    NotPositiveDefinite,
    SparsityPattern,
    _factor_values,
    cholesky,
    log_det,
    min_degree_order,
    symbolic_factor,
)
from ._kernels import row_dots
from .lmi import SdpFeasibilityProblem

__all__ = [
    "SolverPath",
    "SolveStatus",
    "SolverOptions",
    "SolveResult",
    "solve_margin",
    "assemble_newton",
    "barrier",
    "dual_residual",
    "NewtonAssembler",
]

_SMALL_SUPPORT = 32
_GATHER_BUDGET = 2_000_000
DENSE_EIG_MAX = 400


class SolverPath(str, enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"
    AUTO = "auto"


class SolveStatus(str, enum.Enum):
    MARGIN_FOUND = "MarginFound"
    NUMERICAL_FAILURE = "NumericalFailure"
    ITERATION_LIMIT = "IterationLimit"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class SolverOptions:
    """Solver settings.

    ``max_iter`` counts Newton steps. ``gap_tol`` bounds the certified
    duality gap relative to ``max(1, |t|)``. ``kkt_tol`` bounds the reported
    residual ``lambda_max(sum y_i Q^i + t I - W)``. ``path`` selects how the slack matrix is
    factored; ``AUTO`` picks the sparse path when the aggregate density is
    below ``auto_density``.
    """

    max_iter: int = 100
    gap_tol: float = 1e-8
    kkt_tol: float = 1e-6
    init_scale: float = 1.0
    path: SolverPath = SolverPath.AUTO
    auto_density: float = 0.10
    tau_growth: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "path", SolverPath(self.path))
        if self.gap_tol <= 0 or self.kkt_tol <= 0 or self.init_scale <= 0:
            raise ValueError("tolerances and scales must be positive")
        if self.max_iter < 1 or self.tau_growth <= 1:
            raise ValueError("invalid iteration settings")


@dataclass
class SolveResult:
    status: SolveStatus
    margin: float
    y: np.ndarray
    iterations: int
    path: SolverPath
    eps: float = 0.0
    gap: float = math.nan
    kkt_residual: float = math.nan
    decrement: float = math.nan
    log: list = field(default_factory=list)
    fill: dict = field(default_factory=dict)
    solve_seconds: float = 0.0

    @property
    def feasible(self) -> bool:
        """LMI ``F(y) <= -eps I`` holds at ``y`` (``W`` already carries ``eps``)."""
        if self.status is SolveStatus.UNBOUNDED:
            return True
        return self.status is SolveStatus.MARGIN_FOUND and self.margin >= 0.0

    @property
    def lmi_margin(self) -> float:
        """Upper bound on ``lambda_max(F(y))`` certified by the solve."""
        return -(self.margin + self.eps)


def _weights(pattern: SparsityPattern) -> np.ndarray:
    return np.where(pattern.rows == pattern.cols, 1.0, 2.0)


class NewtonAssembler:
    """Builds ``H_kl = tr(X Q_k X Q_l)`` and ``g_k = tr(X Q_k)`` from a dense ``X``.

    The margin variable (``Q = I``) is appended as the last index. Variables
    whose coefficient touches few rows are handled by gathering small blocks
    of ``X``; the others through dense products ``Q_l X``.
    """

    def __init__(self, problem: SdpFeasibilityProblem, with_margin=True, small=_SMALL_SUPPORT):
        p = problem.pattern
        self.n = p.order
        self.m = problem.m
        self.rows, self.cols = p.rows, p.cols
        self.weights = _weights(p)
        self.coeffs = problem.coeffs
        self.with_margin = with_margin
        small_idx, big_idx, supports, blocks = [], [], [], []
        for k in range(self.m):
            J = problem.support(k)
            if 0 < J.size <= min(small, self.n // 2):
                small_idx.append(k)
                supports.append(J)
                blocks.append(problem.Q(k)[J][:, J])
            elif J.size:
                big_idx.append(k)
        self.small = np.array(small_idx, dtype=np.int64)
        # concatenated supports; block k of Q_small acts on rows offsets[k]:offsets[k+1]
        if supports:
            self.support_cat = np.concatenate(supports)
            self.offsets = np.cumsum([0] + [J.size for J in supports])
            self.q_small = sp.block_diag(blocks, format="csr")
        else:
            self.support_cat = np.zeros(0, dtype=np.int64)
            self.offsets = np.zeros(1, dtype=np.int64)
            self.q_small = None
        self.big = np.array(big_idx, dtype=np.int64)
        self.big_mats = []
        for k in big_idx:
            Q = problem.Q(k)
            self.big_mats.append(Q.toarray() if Q.nnz > 0.25 * self.n * self.n else Q.tocsr())
        if with_margin:
            self.big_mats.append(None)
        # positions of the pattern touched by small-support variables
        if self.small.size:
            c = self.coeffs
            sub = c[self.small]
            if sp.issparse(sub):
                self.small_pos = np.unique(sp.csr_matrix(sub).indices)
                self.small_coeffs = sp.csr_matrix(sub)[:, self.small_pos]
            else:
                self.small_pos = np.flatnonzero(np.any(sub != 0, axis=0))
                self.small_coeffs = sub[:, self.small_pos]
        else:
            self.small_pos = np.zeros(0, dtype=np.int64)
            self.small_coeffs = None

    @property
    def size(self) -> int:
        return self.m + (1 if self.with_margin else 0)

    def gradient(self, X: np.ndarray) -> np.ndarray:
        g = np.empty(self.size)
        vals = X[self.rows, self.cols] * self.weights
        g[: self.m] = self.coeffs @ vals if self.m else 0.0
        if self.with_margin:
            g[self.m] = np.trace(X)
        return g

    def hessian(self, X: np.ndarray) -> np.ndarray:
        size = self.size
        H = np.zeros((size, size))
        self._small_small(X, H)
        big_ids = list(self.big) + ([self.m] if self.with_margin else [])
        if big_ids:
            Bs = [X if Q is None else Q @ X for Q in self.big_mats]
            Bs = [np.asarray(B) for B in Bs]
            ids = np.array(big_ids)
            stack = np.stack(Bs)
            Hbb = np.tensordot(stack, stack, axes=([1, 2], [2, 1]))
            H[np.ix_(ids, ids)] = 0.5 * (Hbb + Hbb.T)
            if self.small.size:
                r = self.rows[self.small_pos]
                c = self.cols[self.small_pos]
                w = self.weights[self.small_pos]
                for l, B in zip(ids, Bs):
                    yv = _gather_product(X, B, r, c) * w
                    col = self.small_coeffs @ yv
                    H[self.small, l] = col
                    H[l, self.small] = col
        return H

    def _small_small(self, X, H):
        # tr(Q_k X Q_l X) is the (k, l) block sum of T * T.T with T = blockdiag(Q) X[J, J]
        if not self.small.size:
            return
        J, off = self.support_cat, self.offsets
        Z = X[np.ix_(J, J)]
        T = np.asarray(self.q_small @ Z)
        step = max(1, _GATHER_BUDGET // J.size)
        for k0 in range(0, self.small.size, step):
            k1 = min(k0 + step, self.small.size)
            R = slice(off[k0], off[k1])
            E = T[R] * T[:, R].T
            blk = np.add.reduceat(np.add.reduceat(E, off[k0:k1] - off[k0], axis=0), off[:-1], axis=1)
            H[np.ix_(self.small[k0:k1], self.small)] = blk
        ix = np.ix_(self.small, self.small)
        H[ix] = 0.5 * (H[ix] + H[ix].T)


def _gather_product(X, B, rows, cols):
    """Entries ``(X @ B)[rows[p], cols[p]]`` without forming the product."""
    n = X.shape[0]
    if rows.size * 4 >= n * n:
        return (X @ B)[rows, cols]
    return row_dots(np.ascontiguousarray(X), np.ascontiguousarray(B.T), rows, cols)


def assemble_newton(factor: CholeskyFactor, Qs):
    """Newton matrix ``H_ij = tr(S^-1 Q_i S^-1 Q_j)`` and ``g_i = tr(S^-1 Q_i)``.

    ``factor`` is the Cholesky factor of ``S``; ``S^-1`` is obtained column by
    column from triangular solves with it.
    """
    n = factor.order
    mats = [sp.csr_matrix(Q) for Q in Qs]
    prob = SdpFeasibilityProblem.from_matrices(sp.csr_matrix((n, n)), mats)
    asm = NewtonAssembler(prob, with_margin=False)
    X = factor.inverse()
    return asm.hessian(X), asm.gradient(X)


def barrier(values, symbolic) -> float:
    """``-log det S`` on the symbolic structure; ``inf`` outside the cone."""
    try:
        return -log_det(cholesky(values, symbolic))
    except NotPositiveDefinite:
        return math.inf


class _DenseSlack:
    path = SolverPath.DENSE

    def __init__(self, problem: SdpFeasibilityProblem):
        p = problem.pattern
        self.n = p.order
        self.rows, self.cols = p.rows, p.cols
        self.fill = {"order": self.n, "nnz": p.nnz, "fill_count": 0, "fill_ratio": 0.0}

    def factor(self, values):
        S = np.zeros((self.n, self.n), order="F")
        S[self.rows, self.cols] = values
        c, info = lapack.dpotrf(S, lower=1, overwrite_a=1, clean=1)
        return None if info != 0 else c

    def log_det(self, c) -> float:
        return float(2.0 * np.sum(np.log(np.diag(c))))

    def inverse(self, c) -> np.ndarray:
        inv, info = lapack.dpotri(c, lower=1)
        if info != 0:
            raise np.linalg.LinAlgError("dpotri failed")
        return np.tril(inv) + np.tril(inv, -1).T


class _SparseSlack:
    path = SolverPath.SPARSE

    def __init__(self, problem: SdpFeasibilityProblem):
        p = problem.pattern
        self.symbolic = symbolic_factor(p, min_degree_order(p))
        s = self.symbolic
        self.fill = {"order": s.order, "nnz": p.nnz, "fill_count": s.fill_count,
                     "fill_ratio": s.fill_ratio}

    def factor(self, values):
        try:
            return _factor_values(np.asarray(values, dtype=float), self.symbolic)
        except NotPositiveDefinite:
            return None

    def log_det(self, f) -> float:
        return log_det(f)

    def inverse(self, f) -> np.ndarray:
        return f.inverse()


def _select_path(problem, opts) -> SolverPath:
    if opts.path is not SolverPath.AUTO:
        return opts.path
    return SolverPath.SPARSE if problem.pattern.density < opts.auto_density else SolverPath.DENSE


def _jacobi_solve(H, b):
    # diagonal scaling: bound terms make the diagonal span many decades
    diag = np.diag(H)
    floor = max(np.finfo(float).eps * float(np.max(np.abs(diag), initial=0.0)), np.finfo(float).tiny)
    dg = np.sqrt(np.maximum(diag, floor))
    Hs = H / dg[:, None] / dg[None, :]
    try:
        cf = scipy.linalg.cho_factor(Hs, lower=True, check_finite=False)
        x = scipy.linalg.cho_solve(cf, b / dg, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        # rounding made Hs slightly indefinite: pseudo-inverse on the PSD part
        w, V = np.linalg.eigh(Hs)
        keep = w > 1e-13 * max(float(w[-1]), 1.0)
        x = V[:, keep] @ ((V[:, keep].T @ (b / dg)) / w[keep])
    return x / dg


def _null_basis(a, curvature=None):
    """Basis of ``{d : a . d = 0}``.

    Eliminates the coordinate with the largest ``|a_j| / sqrt(curvature_j)``;
    eliminating a stiff coordinate (one near its bound) would spread its
    huge Hessian entry over the whole reduced system.
    """
    weight = np.abs(a)
    if curvature is not None:
        weight = weight / np.sqrt(np.maximum(curvature, np.finfo(float).tiny))
    j = int(np.argmax(weight))
    keep = np.delete(np.arange(a.size), j)
    Z = np.zeros((a.size, a.size - 1))
    Z[keep, np.arange(a.size - 1)] = 1.0
    Z[j] = -a[keep] / a[j]
    return Z


def _newton_direction(H, g, Z=None):
    """Newton step and reduced gradient, restricted to ``range(Z)`` when given."""
    if Z is None:
        return -_jacobi_solve(H, g), g
    gr = Z.T @ g
    Hr = Z.T @ H @ Z
    return -(Z @ _jacobi_solve(Hr, gr)), gr


def dual_residual(problem: SdpFeasibilityProblem, y, t) -> float:
    """``max(0, lambda_max(sum y_i Q^i + t I - W))``.

    Dense eigensolve up to order ``DENSE_EIG_MAX``; above it a successful
    sparse Cholesky of the slack proves the residual is zero.
    """
    values = problem.slack_values(y, t)
    if problem.order > DENSE_EIG_MAX:
        try:
            pattern = problem.pattern
            cholesky(values, symbolic_factor(pattern, min_degree_order(pattern)))
            return 0.0
        except NotPositiveDefinite:
            pass
    S = problem.to_matrix(values).toarray()
    return max(0.0, -float(np.linalg.eigvalsh(S)[0]))


def _initial_y(problem):
    lo, hi, a = problem.lower, problem.upper, problem.normalization
    has_lo, has_hi = np.isfinite(lo), np.isfinite(hi)
    with np.errstate(invalid="ignore"):
        y = np.where(has_lo & has_hi, lo + np.minimum(1.0, 0.5 * (hi - lo)),
                     np.where(has_lo, lo + 1.0, np.where(has_hi, hi - 1.0, 0.0)))
    if a is not None:
        on = a != 0
        y[on] = a[on] / float(a @ a)
        if np.any(y <= lo) or np.any(y >= hi):
            raise ValueError("normalization point violates the variable bounds")
    return y


def solve_margin(problem: SdpFeasibilityProblem, opts: SolverOptions | None = None) -> SolveResult:
    """Largest ``t`` with ``W - sum y_i Q^i - t I >= 0`` over the variable constraints.

    The verdict ``t* >= 0`` means the original LMI holds with margin ``eps``.
    Statuses: ``MarginFound`` when the gap and stationarity tolerances are met;
    ``IterationLimit``; ``NumericalFailure`` when no step keeps ``S`` positive
    definite or stationarity stalls; ``Unbounded`` when ``t`` grows without limit.
    """
    opts = opts or SolverOptions()
    start = time.perf_counter()
    path = _select_path(problem, opts)
    slack = _SparseSlack(problem) if path is SolverPath.SPARSE else _DenseSlack(problem)
    asm = NewtonAssembler(problem)
    n, m = problem.order, problem.m
    lo, hi = problem.lower, problem.upper
    has_lo, has_hi = np.isfinite(lo), np.isfinite(hi)
    nu = n + int(has_lo.sum()) + int(has_hi.sum())
    diag = (problem.pattern.rows == problem.pattern.cols).astype(float)
    a_full = None if problem.normalization is None else np.append(problem.normalization, 0.0)

    y = _initial_y(problem)
    s0 = problem.slack_values(y)
    scale = 1.0 + (float(np.abs(s0).max()) if s0.size else 0.0)
    t = -scale * n * opts.init_scale
    tau = n / abs(t)
    unbounded_at = 1e12 * scale

    def slack_at(y, t):
        return problem.slack_values(y, t)

    def objective(y, t, handle):
        val = -tau * t - slack.log_det(handle)
        if has_lo.any():
            val -= np.sum(np.log(y[has_lo] - lo[has_lo]))
        if has_hi.any():
            val -= np.sum(np.log(hi[has_hi] - y[has_hi]))
        return val

    handle = slack.factor(slack_at(y, t))
    if handle is None:
        raise RuntimeError("initial point is not interior")
    log = []
    it = 0
    status = None
    dec = math.nan
    X = None

    def gap_bound(dec):
        # distance to the central point in the local norm bounds the objective error
        lam = math.sqrt(max(dec, 0.0))
        if lam >= 1.0:
            return math.inf
        return (nu + math.sqrt(nu) * lam / (1.0 - lam)) / tau

    while True:
        if X is None:
            X = slack.inverse(handle)
            g_sdp = asm.gradient(X)
            H_sdp = None
        dlo = np.where(has_lo, y - lo, np.inf)
        dhi = np.where(has_hi, hi - y, np.inf)
        g = g_sdp.copy()
        g[m] -= tau
        g[:m] += -1.0 / dlo + 1.0 / dhi
        if H_sdp is None:
            H_sdp = asm.hessian(X)
        H = H_sdp.copy()
        H[np.arange(m), np.arange(m)] += 1.0 / dlo**2 + 1.0 / dhi**2
        Z = None if a_full is None else _null_basis(a_full, np.diag(H))
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
            status = SolveStatus.NUMERICAL_FAILURE
            break
        try:
            d, _ = _newton_direction(H, g, Z)
        except np.linalg.LinAlgError:
            status = SolveStatus.NUMERICAL_FAILURE
            break
        # rounding can make a tiny decrement negative
        dec = max(float(-g @ d), 0.0)
        target = opts.gap_tol * max(1.0, abs(t))
        # the bound is valid anywhere inside the unit Dikin ellipsoid, not only when centered
        if gap_bound(dec) <= target:
            status = SolveStatus.MARGIN_FOUND
            break
        if dec <= 0.25:
            # a centered point at (nu + sqrt(nu)) / target meets the tolerance; don't overshoot it
            tau = min(tau * opts.tau_growth, (nu + math.sqrt(nu)) / target)
            continue
        if it >= opts.max_iter:
            status = SolveStatus.ITERATION_LIMIT
            break
        dy, dt = d[:m], d[m]
        amax = 1.0
        neg = has_lo & (dy < 0)
        if neg.any():
            amax = min(amax, 0.98 * float(np.min((y[neg] - lo[neg]) / -dy[neg])))
        pos = has_hi & (dy > 0)
        if pos.any():
            amax = min(amax, 0.98 * float(np.min((hi[pos] - y[pos]) / dy[pos])))
        f0 = objective(y, t, handle)
        alpha = amax
        accepted = None
        while alpha > 1e-14:
            y1, t1 = y + alpha * dy, t + alpha * dt
            h1 = slack.factor(slack_at(y1, t1))
            if h1 is not None:
                f1 = objective(y1, t1, h1)
                if f1 <= f0 - 1e-4 * alpha * dec:
                    accepted = (y1, t1, h1)
                    break
            alpha *= 0.5
        it += 1
        log.append({"iteration": it, "tau": float(tau), "t": float(t), "decrement": dec,
                    "step": float(alpha), "barrier": float(f0)})
        if accepted is None:
            # no decrease is resolvable in floating point
            status = SolveStatus.NUMERICAL_FAILURE
            break
        y, t, handle = accepted
        X = None
        if t > unbounded_at:
            status = SolveStatus.UNBOUNDED
            break

    return SolveResult(
        status=status,
        margin=float(t),
        y=y,
        iterations=it,
        path=path,
        eps=problem.eps,
        gap=gap_bound(dec) if not math.isnan(dec) else math.nan,
        kkt_residual=dual_residual(problem, y, t),
        decrement=dec,
        log=log,
        fill=dict(slack.fill),
        solve_seconds=time.perf_counter() - start,
    )
