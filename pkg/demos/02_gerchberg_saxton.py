"""
Single-start Gerchberg-Saxton on random vectors
===============================================

Alternating projections between the range of V^* and the set of vectors
with the measured moduli.  Most random starts succeed; the rest stall.
"""

import numpy as np

from cprpw import rng
from cprpw.experiments import ExperimentConfig, run_gs_benchmark
from cprpw.finite import example_matrix
from cprpw.gs import GsConfig, build_pinv, gs_solve

V = example_matrix()
op = build_pinv(V)

# One run with its error trace: epsilon is the rank-one Gram distance to the truth
y = rng.uniform_complex(rng.stream(1, "gs-target", 0), 3)
alpha = rng.unimodular(rng.stream(1, "gs-phases", 0), 6)
est, trace = gs_solve(op, np.abs(op.analysis @ y), alpha, truth=y)
print("converged:", trace.converged, "after", trace.iterations_to_threshold, "iterations")
for n in (0, 10, 50, 100, 200, 400, 900):
    print(f"  eps_{n:<4d} {trace.epsilon[n]:.3e}")

# The full benchmark: 1000 random vectors, one random start each
summary = run_gs_benchmark(ExperimentConfig(kind="gs-bench", trials=1000, seed=1, gs=GsConfig(restarts=1)))
for line in summary.lines():
    print(line)

# Most failures stall far from the truth; a few are merely slow
failed = [r for r in summary.records if not r.success][:5]
print("final errors of some failed trials:", [f"{r.final_epsilon:.2e}" for r in failed])
