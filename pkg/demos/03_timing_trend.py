"""
Timing the two formulations
===========================

Solve one frequency of chains of growing length with the lumped LMI on the
dense slack path and the sparse LMI on the sparse Cholesky path. The lumped
problem is smaller for short chains; the sparse one wins as the chain grows.
Larger N values take minutes, so this stops at 100.
"""

import numpy as np

from sparseiqc import GeneratorConfig, SolverOptions, generate_instance
from sparseiqc.analysis import analyze_frequency

dense = SolverOptions(path="dense")
sparse = SolverOptions(path="sparse")

print(f"{'N':>5} {'lumped [s]':>11} {'sparse [s]':>11} {'ratio':>7}")
for N in (10, 25, 50, 100):
    t = {"lumped": [], "sparse": []}
    for trial in range(2):
        sys = generate_instance(GeneratorConfig(N=N, seed=100 * N + trial))
        t["lumped"].append(analyze_frequency(sys, 1.0, "lumped", dense).solve_seconds)
        t["sparse"].append(analyze_frequency(sys, 1.0, "sparse", sparse).solve_seconds)
    lm, sm = np.mean(t["lumped"]), np.mean(t["sparse"])
    print(f"{N:5d} {lm:11.3f} {sm:11.3f} {lm / sm:7.2f}")

# the same sweep from the command line writes a CSV and a manifest:
#   sparseiqc benchmark bench.json --out bench.csv
# with bench.json = {"N": [10, 50, 100, 200], "trials": 5}
