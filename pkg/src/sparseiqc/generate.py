"""Random benchmark instances: chains and scale-free trees of uncertain subsystems."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np

from .lti import (
    FrequencyGrid,
    IllPosedInterconnection,
    StateSpaceSystem,
    freq_response,
    hinf_norm,
    is_hurwitz,
    lumped_state_matrix,
)
from .model import (
    InterconnectedSystem,
    InterconnectionMatrix,
    IqcMultiplierSpec,
    Subsystem,
    build_interconnection,
    chain_interconnection,
    well_posed,
)

__all__ = [
    "Topology",
    "GeneratorConfig",
    "GenerationExhausted",
    "DegreeSequence",
    "ConditionReport",
    "power_law_pmf",
    "sample_degree_sequence",
    "sample_scale_free",
    "first_order_matrix",
    "gen_subsystem",
    "rescale_small_gain",
    "verify_conditions",
    "generate_instance",
    "generate_instances",
]

MAX_ATTEMPTS = 100
COND2_TOL = 1e-6
RESCALE_CUSHION = 0.9


class GenerationExhausted(RuntimeError):
    pass


class Topology(str, enum.Enum):
    CHAIN = "chain"
    SCALE_FREE = "scale_free"


@dataclass(frozen=True)
class GeneratorConfig:
    """Instance-family description; ``seed`` fixes every random draw."""

    N: int
    topology: Topology = Topology.CHAIN
    alpha: float = 2.5
    seed: int = 0
    pole_range: tuple = (-5.0, -0.1)
    gain_range: tuple = (-2.0, 2.0)
    grid: str = "log:1e-2:1e2:20"
    instances: int = 1

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        object.__setattr__(self, "pole_range", tuple(float(x) for x in self.pole_range))
        object.__setattr__(self, "gain_range", tuple(float(x) for x in self.gain_range))
        lo, hi = self.pole_range
        if not (lo <= hi < 0):
            raise ValueError("pole range must be strictly negative and ordered")
        if self.gain_range[0] > self.gain_range[1]:
            raise ValueError("gain range must be ordered")
        if self.N < 2:
            raise ValueError("need at least two subsystems")
        if self.topology is Topology.SCALE_FREE and not self.alpha > 1:
            raise ValueError("power-law exponent alpha must exceed 1")
        if self.instances < 1:
            raise ValueError("instances must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        FrequencyGrid.parse(self.grid)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        d.pop("schema_version", None)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["topology"] = self.topology.value
        d["pole_range"] = list(self.pole_range)
        d["gain_range"] = list(self.gain_range)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class DegreeSequence:
    degrees: np.ndarray
    tree: bool = True

    def __post_init__(self):
        d = np.asarray(self.degrees, dtype=np.int64)
        object.__setattr__(self, "degrees", d)
        if np.any(d < 1):
            raise ValueError("degrees must be positive")
        if d.sum() % 2:
            raise ValueError("degree sum must be even")
        if self.tree and d.sum() != 2 * d.size - 2:
            raise ValueError("a tree on N nodes has degree sum 2N - 2")
        if not nx.is_graphical(d.tolist()):
            raise ValueError("degree sequence is not graphical")


def power_law_pmf(N: int, alpha: float, kmax: int | None = None) -> np.ndarray:
    """``P(k) = k^-alpha / sum_{n<=N} n^-alpha`` for ``k = 1..kmax``.

    With ``kmax = N`` (default) the probabilities sum to one.
    """
    kmax = N if kmax is None else kmax
    norm = np.sum(np.arange(1, N + 1, dtype=float) ** -alpha)
    return np.arange(1, kmax + 1, dtype=float) ** -alpha / norm


def sample_degree_sequence(N: int, alpha: float, rng) -> DegreeSequence:
    """Degrees drawn from the power law truncated to ``[1, N-1]``, repaired to sum ``2N - 2``.

    Surplus units are removed from uniformly chosen non-leaf nodes. Missing
    units go to non-leaf nodes with probability proportional to ``1/degree``,
    which keeps both the leaf fraction and the hub tail close to the sampled
    law; a leaf is only promoted when no other node can take the unit.
    """
    p = power_law_pmf(N, alpha, N - 1)
    p = p / p.sum()
    deg = rng.choice(np.arange(1, N), size=N, p=p)
    target = 2 * N - 2
    total = int(deg.sum())
    while total > target:
        i = rng.integers(N)
        if deg[i] > 1:
            deg[i] -= 1
            total -= 1
    while total < target:
        w = np.where((deg > 1) & (deg < N - 1), 1.0 / deg, 0.0)
        if w.sum() > 0:
            i = rng.choice(N, p=w / w.sum())
        else:
            i = rng.choice(np.flatnonzero(deg < N - 1))
        deg[i] += 1
        total += 1
    return DegreeSequence(deg)


def sample_scale_free(N: int, alpha: float, seed=None) -> np.ndarray:
    """Adjacency matrix of a random tree with power-law degrees.

    The tree is realized from the Pruefer sequence that lists node i
    ``degree(i) - 1`` times in random order, so the degree sequence is
    reproduced exactly.
    """
    if N < 2:
        raise ValueError("need at least two nodes")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    deg = sample_degree_sequence(N, alpha, rng).degrees
    A = np.zeros((N, N), dtype=np.int8)
    if N == 2:
        A[0, 1] = A[1, 0] = 1
        return A
    seq = np.repeat(np.arange(N), deg - 1)
    rng.shuffle(seq)
    tree = nx.from_prufer_sequence(seq.tolist())
    for u, v in tree.edges():
        A[u, v] = A[v, u] = 1
    return A


def first_order_matrix(rows, cols, config: GeneratorConfig, rng) -> StateSpaceSystem:
    """Transfer matrix whose entries are independent ``k * (-p) / (s - p)``.

    ``p`` is drawn from the pole range and ``k`` (the DC gain) from the gain
    range; one state per entry, so ``A`` is diagonal.
    """
    if rows == 0 or cols == 0:
        return StateSpaceSystem.static(np.zeros((rows, cols)))
    poles = rng.uniform(*config.pole_range, size=(rows, cols))
    gains = rng.uniform(*config.gain_range, size=(rows, cols))
    n = rows * cols
    A = np.diag(poles.ravel())
    B = np.zeros((n, cols))
    C = np.zeros((rows, n))
    idx = np.arange(n)
    B[idx, idx % cols] = 1.0
    C[idx // cols, idx] = (gains * -poles).ravel()
    return StateSpaceSystem(A, B, C, np.zeros((rows, cols)))


def _max_gain_sq(sys: StateSpaceSystem, grid) -> float:
    worst = 0.0
    for w in grid:
        G = freq_response(sys, w)
        worst = max(worst, float(np.linalg.norm(G, 2)) ** 2 if G.size else 0.0)
    return worst


def _condition2(sub: Subsystem, grid) -> bool:
    # a nonnegative r gives r (|G_pq|^2 - 1) < 0 exactly when the gain is below one
    return _max_gain_sq(sub.pq, grid) < 1.0 - COND2_TOL


def gen_subsystem(d: int, m: int, l: int, config: GeneratorConfig, rng, grid=None) -> Subsystem:
    """Random subsystem with first-order entries; redrawn until condition 2 holds."""
    if d <= 0 or m < 0 or l < 0:
        raise ValueError("invalid channel dimensions")
    grid = FrequencyGrid.parse(config.grid) if grid is None else grid
    for _ in range(MAX_ATTEMPTS):
        sub = Subsystem(
            first_order_matrix(d, d, config, rng),
            first_order_matrix(d, m, config, rng),
            first_order_matrix(l, d, config, rng),
            first_order_matrix(l, m, config, rng),
            IqcMultiplierSpec(d),
        )
        if _condition2(sub, grid):
            return sub
    raise GenerationExhausted(f"no subsystem passed the gain test in {MAX_ATTEMPTS} attempts")


def rescale_small_gain(subsystems, gamma: InterconnectionMatrix, cushion=RESCALE_CUSHION):
    """Scale each ``G_zw`` with ``||G_zw||_inf >= 1/sigma_max(Gamma)`` down to ``cushion / sigma_max``."""
    g = gamma.norm()
    out = []
    for sub in subsystems:
        if g == 0 or sub.zw.D.size == 0:
            out.append(sub)
            continue
        h = hinf_norm(sub.zw)
        if h >= 1.0 / g:
            sub = sub.replace(zw=sub.zw.scale_output(cushion / (g * h)))
        out.append(sub)
    return out


@dataclass
class ConditionReport:
    """Per-subsystem results for conditions 1 and 2 plus the global condition 3."""

    condition1: list = field(default_factory=list)
    condition2: list = field(default_factory=list)
    condition3: bool = False
    detail: str = ""

    @property
    def all_pass(self) -> bool:
        return all(self.condition1) and all(self.condition2) and self.condition3

    def to_dict(self) -> dict:
        return {
            "condition1": [bool(x) for x in self.condition1],
            "condition2": [bool(x) for x in self.condition2],
            "condition3": bool(self.condition3),
            "all_pass": self.all_pass,
        }


def verify_conditions(sys: InterconnectedSystem, grid) -> ConditionReport:
    """Check stability of every block, the per-subsystem gain test and the loop stability."""
    rep = ConditionReport()
    for sub in sys.subsystems:
        blocks = (sub.pq, sub.pw, sub.zq, sub.zw)
        rep.condition1.append(all(b.n_states == 0 or is_hurwitz(b.A) for b in blocks))
        rep.condition2.append(_condition2(sub, grid))
    try:
        rep.condition3 = bool(is_hurwitz(lumped_state_matrix(sys)))
    except IllPosedInterconnection as exc:
        rep.condition3 = False
        rep.detail = str(exc)
    return rep


def _topology(config: GeneratorConfig, rng):
    if config.topology is Topology.CHAIN:
        return chain_interconnection(config.N), None
    A = sample_scale_free(config.N, config.alpha, rng)
    return build_interconnection(A), A


def generate_instance(config: GeneratorConfig, rng=None) -> InterconnectedSystem:
    """One instance satisfying conditions 1 to 3 and well-posedness on the grid."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    grid = FrequencyGrid.parse(config.grid)
    gamma, adjacency = _topology(config, rng)
    subs = [
        gen_subsystem(1, m, l, config, rng, grid)
        for m, l in zip(gamma.in_sizes, gamma.out_sizes)
    ]
    subs = rescale_small_gain(subs, gamma)
    sys = InterconnectedSystem(subs, gamma, adjacency)
    rep = verify_conditions(sys, grid)
    if not rep.all_pass or not well_posed(sys, grid):
        raise GenerationExhausted("generated instance failed verification")
    return sys


def generate_instances(config: GeneratorConfig) -> list[InterconnectedSystem]:
    """``config.instances`` independent instances from spawned seed streams."""
    seeds = np.random.SeedSequence(int(config.seed)).spawn(config.instances)
    return [generate_instance(config, np.random.default_rng(s)) for s in seeds]
