"""Continuous-time state-space systems evaluated on frequency grids."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

if TYPE_CHECKING:
    from .model import InterconnectedSystem

__all__ = [
    "StateSpaceSystem",
    "FrequencyGrid",
    "SingularResolvent",
    "UnstableSystem",
    "IllPosedInterconnection",
    "evaluate",
    "freq_response",
    "is_hurwitz",
    "spectral_abscissa",
    "block_diag",
    "hinf_norm",
    "lumped_response",
    "lumped_state_matrix",
    "interconnection_responses",
]

HURWITZ_TOL = 1e-9
POLE_TOL = 1e-12


class SingularResolvent(ArithmeticError):
    """The evaluation point coincides with a pole of the system."""


class UnstableSystem(ValueError):
    pass


class IllPosedInterconnection(ArithmeticError):
    """``I - Gamma G_zw`` (or ``I - Gamma D_zw``) is not invertible."""


@dataclass(frozen=True, eq=False)
class StateSpaceSystem:
    """Real realization ``G(s) = C (sI - A)^{-1} B + D``.

    A system with zero states is the static gain ``D``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        A = np.asarray(self.A, dtype=float)
        n = A.shape[0] if A.size else 0
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float).reshape(n, m)
        C = np.asarray(self.C, dtype=float).reshape(p, n)
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)

    @classmethod
    def static(cls, D) -> "StateSpaceSystem":
        D = np.atleast_2d(np.asarray(D, dtype=float))
        p, m = D.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.D.shape

    @cached_property
    def diagonal_dynamics(self) -> bool:
        A = self.A
        return not np.any(A - np.diag(np.diag(A)))

    @cached_property
    def poles(self) -> np.ndarray:
        if self.n_states == 0:
            return np.zeros(0, dtype=complex)
        if self.diagonal_dynamics:
            return np.diag(self.A).astype(complex)
        return scipy.linalg.eigvals(self.A)

    def scale_output(self, alpha: float) -> "StateSpaceSystem":
        """Realization of ``alpha * G`` obtained by scaling C and D."""
        return StateSpaceSystem(self.A, self.B, alpha * self.C, alpha * self.D)

    def __repr__(self):
        return f"StateSpaceSystem(states={self.n_states}, outputs={self.n_outputs}, inputs={self.n_inputs})"


def evaluate(sys: StateSpaceSystem, s: complex) -> np.ndarray:
    """Transfer matrix at a complex point ``s``."""
    if sys.n_states == 0:
        return sys.D.astype(complex)
    if np.min(np.abs(s - sys.poles)) < POLE_TOL:
        raise SingularResolvent(f"s = {s} is a pole of the system")
    if sys.diagonal_dynamics:
        X = sys.B / (s - np.diag(sys.A))[:, None]
    else:
        X = scipy.linalg.solve(s * np.eye(sys.n_states) - sys.A, sys.B.astype(complex))
    return sys.C @ X + sys.D


def freq_response(sys: StateSpaceSystem, omega: float) -> np.ndarray:
    """``G(j omega)``; ``omega = inf`` returns ``D`` exactly."""
    if math.isinf(omega):
        return sys.D.astype(complex)
    return evaluate(sys, 1j * float(omega))


class FrequencyGrid(Sequence):
    """Strictly increasing nonnegative frequencies, optionally ending with ``inf``.

    Parsed from ``"log:lo:hi:n"`` (n log-spaced points plus 0 and inf),
    ``"lin:lo:hi:n"``, ``"list:w1,w2,..."`` or a single number.
    """

    def __init__(self, omegas):
        w = [float(x) for x in omegas]
        if not w:
            raise ValueError("frequency grid is empty")
        if any(x < 0 or math.isnan(x) for x in w):
            raise ValueError("frequencies must be nonnegative")
        if any(b <= a for a, b in zip(w, w[1:])):
            raise ValueError("frequencies must be strictly increasing")
        self._w = tuple(w)

    @classmethod
    def parse(cls, spec: str) -> "FrequencyGrid":
        spec = str(spec).strip()
        kind, _, rest = spec.partition(":")
        if kind == "log":
            lo, hi, n = rest.split(":")
            pts = np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(n))
            return cls([0.0, *pts.tolist(), math.inf])
        if kind == "lin":
            lo, hi, n = rest.split(":")
            return cls(np.linspace(float(lo), float(hi), int(n)).tolist())
        if kind == "list":
            return cls(sorted(float(x) for x in re.split(r"[,\s]+", rest) if x))
        return cls([float(spec)])

    @classmethod
    def default(cls) -> "FrequencyGrid":
        return cls.parse("log:1e-2:1e2:20")

    def __getitem__(self, i):
        return self._w[i]

    def __len__(self):
        return len(self._w)

    def __repr__(self):
        return f"FrequencyGrid({list(self._w)!r})"

    def to_list(self) -> list:
        return ["inf" if math.isinf(w) else w for w in self._w]


def spectral_abscissa(A) -> float:
    """Largest real part of the eigenvalues of a dense or sparse matrix."""
    if sp.issparse(A):
        n = A.shape[0]
        if n <= 3000:
            A = A.toarray()
        else:
            ncv = min(n - 1, 60)
            vals = spla.eigs(A.tocsr(), k=6, which="LR", ncv=ncv, maxiter=50 * n,
                             tol=1e-10, return_eigenvectors=False)
            return float(np.max(vals.real))
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return -math.inf
    if not np.any(A - np.diag(np.diag(A))):
        return float(np.max(np.diag(A)))
    return float(np.max(scipy.linalg.eigvals(A).real))


def is_hurwitz(A) -> bool:
    """True iff every eigenvalue has real part below ``-1e-9``."""
    if not sp.issparse(A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("expected a square matrix")
    return spectral_abscissa(A) < -HURWITZ_TOL


def block_diag(systems: Sequence[StateSpaceSystem]) -> StateSpaceSystem:
    if not systems:
        raise ValueError("need at least one system")
    if len(systems) == 1:
        return systems[0]
    return StateSpaceSystem(
        scipy.linalg.block_diag(*[s.A for s in systems]),
        scipy.linalg.block_diag(*[s.B for s in systems]),
        scipy.linalg.block_diag(*[s.C for s in systems]),
        scipy.linalg.block_diag(*[s.D for s in systems]),
    )


def _sigma_max(G: np.ndarray) -> float:
    if G.size == 0:
        return 0.0
    if G.shape[0] == 1 or G.shape[1] == 1:
        return float(np.linalg.norm(G))
    return float(np.linalg.norm(G, 2))


def _default_hinf_grid(sys: StateSpaceSystem) -> np.ndarray:
    w = np.logspace(-4, 4, 400)
    poles = sys.poles
    if poles.size:
        # resonances sit near |Im p| and near |p| for lightly damped pairs
        extra = np.concatenate([np.abs(poles.imag), np.abs(poles)])
        w = np.concatenate([w, extra[extra > 0]])
    return np.unique(np.concatenate([[0.0], w]))


def hinf_norm(sys: StateSpaceSystem, grid=None) -> float:
    """Peak gain over a frequency grid refined by golden-section search.

    The value is a lower bound on the true H-infinity norm (it is attained at
    the returned frequency).
    """
    if sys.n_states and not is_hurwitz(sys.A):
        raise UnstableSystem("H-infinity norm requires a Hurwitz A matrix")
    dc = _sigma_max(sys.D)
    if sys.n_states == 0 or sys.D.size == 0:
        return dc
    w = _default_hinf_grid(sys) if grid is None else np.array(
        [x for x in grid if math.isfinite(x)], dtype=float)
    gains = np.array([_sigma_max(freq_response(sys, x)) for x in w])
    best = int(np.argmax(gains))
    peak = float(gains[best])
    if w.size >= 2:
        lo = w[max(best - 1, 0)]
        hi = w[min(best + 1, w.size - 1)]
        f = lambda x: _sigma_max(freq_response(sys, x))
        peak = max(peak, _golden_max(f, lo, hi))
    return max(peak, dc)


def _golden_max(f, a, b, tol=1e-10, maxiter=200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    best = max(fc, fd)
    for _ in range(maxiter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        best = max(best, fc, fd)
    return best


def interconnection_responses(sys: "InterconnectedSystem", omega: float):
    """Block-diagonal responses ``(G_pq, G_pw, G_zq, G_zw)`` at one frequency."""
    blocks = {"pq": [], "pw": [], "zq": [], "zw": []}
    for sub in sys.subsystems:
        for key in blocks:
            blocks[key].append(freq_response(getattr(sub, key), omega))
    return tuple(_complex_block_diag(blocks[k]) for k in ("pq", "pw", "zq", "zw"))


def _complex_block_diag(mats):
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for m in mats:
        out[r : r + m.shape[0], c : c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def lumped_response(sys: "InterconnectedSystem", omega: float) -> np.ndarray:
    """``G_pq + G_pw (I - Gamma G_zw)^{-1} Gamma G_zq`` at ``j omega``.

    Evaluated per frequency; no lumped realization is formed.
    """
    Gpq, Gpw, Gzq, Gzw = interconnection_responses(sys, omega)
    gamma = sys.interconnection.matrix
    if gamma.shape[0] == 0:
        return Gpq
    M = np.eye(gamma.shape[0]) - gamma @ Gzw
    if np.linalg.cond(M) >= 1e12:
        raise IllPosedInterconnection(f"I - Gamma G_zw is singular at omega = {omega}")
    return Gpq + Gpw @ np.linalg.solve(M, gamma @ Gzq)


def lumped_state_matrix(sys: "InterconnectedSystem") -> sp.csr_matrix:
    """State matrix of the closed z/w loop, ``A_zw + B_zw (I - Gamma D_zw)^{-1} Gamma C_zw``.

    Returned as a sparse matrix since the stacked G_zw realization is large
    and block structured.
    """
    zw = [s.zw for s in sys.subsystems]
    A = sp.block_diag([sp.csr_matrix(s.A) for s in zw], format="csr")
    B = sp.block_diag([sp.csr_matrix(s.B) for s in zw], format="csr")
    C = sp.block_diag([sp.csr_matrix(s.C) for s in zw], format="csr")
    D = sp.block_diag([sp.csr_matrix(s.D) for s in zw], format="csr")
    gamma = sp.csr_matrix(sys.interconnection.matrix)
    if gamma.shape[0] == 0:
        return A
    if D.nnz == 0:
        K = gamma
    else:
        M = (sp.identity(gamma.shape[0], format="csc") - gamma @ D).tocsc()
        try:
            lu = spla.splu(M)
        except RuntimeError as exc:
            raise IllPosedInterconnection("I - Gamma D_zw is singular") from exc
        if np.any(np.abs(lu.U.diagonal()) < 1e-14):
            raise IllPosedInterconnection("I - Gamma D_zw is singular")
        K = sp.csr_matrix(lu.solve(gamma.toarray()))
    return (A + B @ K @ C).tocsr()
