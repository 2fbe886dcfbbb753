"""Frequency-gridded robust stability analysis and certificates."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lmi import lumped_lmi, sparse_lmi
from .lti import FrequencyGrid, IllPosedInterconnection
from .serialization import SCHEMA_VERSION, encode_float
from .solver import SolverOptions, SolveStatus, solve_margin

__all__ = [
    "FORMS",
    "FrequencyRecord",
    "StabilityCertificate",
    "analyze_frequency",
    "analyze",
    "compare_forms",
]

FORMS = ("lumped", "sparse")
_BUILDERS = {"lumped": lumped_lmi, "sparse": sparse_lmi}
STABLE = "robustly stable (on grid)"
INCONCLUSIVE = "inconclusive"


@dataclass
class FrequencyRecord:
    """Outcome of one per-frequency LMI.

    ``margin`` bounds the largest eigenvalue of the LMI at the returned
    variables; the frequency is certified when ``margin <= -eps``.
    """

    omega: float
    form: str
    status: str
    margin: float = math.nan
    solver_margin: float = math.nan
    eps: float = math.nan
    variables: dict = field(default_factory=dict)
    iterations: int = 0
    order: int = 0
    nnz: int = 0
    fill_ratio: float = 0.0
    build_seconds: float = 0.0
    solve_seconds: float = 0.0
    path: str = ""

    @property
    def certified(self) -> bool:
        return self.status in (SolveStatus.MARGIN_FOUND.value, SolveStatus.UNBOUNDED.value) \
            and self.solver_margin >= 0.0

    def to_dict(self, timing=True) -> dict:
        d = {
            "omega": encode_float(self.omega),
            "form": self.form,
            "status": self.status,
            "certified": self.certified,
            "margin": encode_float(self.margin),
            "eps": encode_float(self.eps),
            "variables": {k: encode_float(v) for k, v in self.variables.items()},
            "iterations": self.iterations,
            "order": self.order,
            "nnz": self.nnz,
            "fill_ratio": self.fill_ratio,
            "path": self.path,
        }
        if timing:
            d["build_seconds"] = self.build_seconds
            d["solve_seconds"] = self.solve_seconds
        return d


@dataclass
class StabilityCertificate:
    form: str
    records: list
    aborted: str | None = None

    @property
    def robustly_stable(self) -> bool:
        return self.aborted is None and bool(self.records) and all(r.certified for r in self.records)

    @property
    def verdict(self) -> str:
        return STABLE if self.robustly_stable else INCONCLUSIVE

    @property
    def build_seconds(self) -> float:
        return sum(r.build_seconds for r in self.records)

    @property
    def solve_seconds(self) -> float:
        return sum(r.solve_seconds for r in self.records)

    def to_dict(self, timing=True) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "kind": "certificate",
            "form": self.form,
            "verdict": self.verdict,
            "aborted": self.aborted,
            "records": [r.to_dict(timing) for r in self.records],
        }
        if timing:
            d["build_seconds"] = self.build_seconds
            d["solve_seconds"] = self.solve_seconds
        return d


def analyze_frequency(sys, omega: float, form: str, opts: SolverOptions | None = None) -> FrequencyRecord:
    """Build and solve one LMI; ill-posed lumped problems give status ``IllPosed``."""
    if form not in _BUILDERS:
        raise ValueError(f"unknown form {form!r}")
    t0 = time.perf_counter()
    try:
        problem = _BUILDERS[form](sys, omega)
    except IllPosedInterconnection:
        return FrequencyRecord(float(omega), form, "IllPosed",
                               build_seconds=time.perf_counter() - t0)
    built = time.perf_counter() - t0
    res = solve_margin(problem, opts)
    return FrequencyRecord(
        omega=float(omega),
        form=form,
        status=res.status.value,
        margin=res.lmi_margin,
        solver_margin=res.margin,
        eps=problem.eps,
        variables={k: float(v) for k, v in zip(problem.labels, res.y)},
        iterations=res.iterations,
        order=problem.order,
        nnz=problem.nnz,
        fill_ratio=float(res.fill.get("fill_ratio", 0.0)),
        build_seconds=built,
        solve_seconds=res.solve_seconds,
        path=res.path.value,
    )


def _job(args):
    return analyze_frequency(*args)


def analyze(sys, grid=None, form: str = "sparse", opts: SolverOptions | None = None,
            jobs: int = 1) -> StabilityCertificate:
    """Certificate over a frequency grid.

    Frequencies are independent; ``jobs > 1`` spreads them over worker
    processes and keeps the records in grid order. An ill-posed frequency
    aborts the lumped analysis.
    """
    grid = FrequencyGrid.default() if grid is None else grid
    if isinstance(grid, str):
        grid = FrequencyGrid.parse(grid)
    tasks = [(sys, w, form, opts) for w in grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_job, tasks))
    else:
        records = []
        for task in tasks:
            records.append(_job(task))
            if records[-1].status == "IllPosed":
                break
    aborted = None
    for i, r in enumerate(records):
        if r.status == "IllPosed":
            aborted = f"interconnection ill posed at omega={r.omega}"
            records = records[: i + 1]
            break
    return StabilityCertificate(form, records, aborted)


def compare_forms(a: StabilityCertificate, b: StabilityCertificate, tol_factor=10.0) -> list:
    """Frequencies where the two forms give opposite signs beyond ``tol_factor * eps``."""
    bad = []
    for ra, rb in zip(a.records, b.records):
        if "IllPosed" in (ra.status, rb.status):
            continue
        tol = tol_factor * max(ra.eps, rb.eps)
        if abs(ra.solver_margin) > tol and abs(rb.solver_margin) > tol \
                and (ra.solver_margin > 0) != (rb.solver_margin > 0):
            bad.append(ra.omega)
    return bad
