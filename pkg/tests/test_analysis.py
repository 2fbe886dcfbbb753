import math

import numpy as np
import pytest
import scipy.sparse as sp

from sparseiqc.analysis import analyze, analyze_frequency, compare_forms
from sparseiqc.generate import GeneratorConfig, generate_instance
from sparseiqc.lti import FrequencyGrid, StateSpaceSystem
from sparseiqc.model import InterconnectedSystem, InterconnectionMatrix, Subsystem

SMALL_GAINS = dict(gain_range=(-0.5, 0.5))


def test_small_gain_instance_is_certified_by_both_forms():
    sys = generate_instance(GeneratorConfig(N=4, seed=1, **SMALL_GAINS))
    a = analyze(sys, "log:1e-2:1e2:5", "lumped")
    b = analyze(sys, "log:1e-2:1e2:5", "sparse")
    assert len(a.records) == len(b.records) == 7
    assert a.robustly_stable and b.robustly_stable
    assert compare_forms(a, b) == []
    for r in b.records:
        assert r.margin <= -r.eps
        assert r.variables["x"] >= 0 and all(r.variables[f"r{i}"] >= 0 for i in range(1, 5))


def test_large_subsystem_gain_is_inconclusive():
    sys = generate_instance(GeneratorConfig(N=4, seed=1, **SMALL_GAINS))
    subs = list(sys.subsystems)
    subs[0] = subs[0].replace(pq=subs[0].pq.scale_output(10.0))
    loud = InterconnectedSystem(subs, sys.interconnection)
    cert = analyze(loud, "log:1e-2:1e2:5", "sparse")
    assert cert.verdict == "inconclusive"
    assert not cert.records[0].certified


def test_default_grid_gives_22_records():
    sys = generate_instance(GeneratorConfig(N=3, seed=2))
    cert = analyze(sys)
    assert len(cert.records) == 22
    assert cert.records[0].omega == 0.0 and math.isinf(cert.records[-1].omega)
    d = cert.to_dict(timing=False)
    assert d["records"][-1]["omega"] == "inf"
    assert "solve_seconds" not in d["records"][0]


def test_parallel_records_match_sequential():
    sys = generate_instance(GeneratorConfig(N=3, seed=3))
    grid = FrequencyGrid.parse("log:1e-1:1e1:3")
    a = analyze(sys, grid, "sparse")
    b = analyze(sys, grid, "sparse", jobs=2)
    assert [r.to_dict(False) for r in a.records] == [r.to_dict(False) for r in b.records]


def static(x):
    return StateSpaceSystem.static(np.atleast_2d(x))


def test_ill_posed_frequency_aborts_lumped_only():
    sub = Subsystem(static(0.1), static(1.0), static(1.0), static(1.0))
    sys = InterconnectedSystem([sub], InterconnectionMatrix(sp.csr_matrix([[1.0]]), (1,), (1,)))
    cert = analyze(sys, "list:1,2", "lumped")
    assert cert.aborted and len(cert.records) == 1 and cert.records[0].status == "IllPosed"
    assert cert.verdict == "inconclusive"
    rec = analyze_frequency(sys, 1.0, "sparse")
    assert rec.status != "IllPosed" and not rec.certified


def test_unknown_form_is_rejected():
    with pytest.raises(ValueError):
        analyze_frequency(generate_instance(GeneratorConfig(N=2, seed=0)), 1.0, "dense")
