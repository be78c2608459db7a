"""
Certifying a measurement matrix
===============================

A real 3 x 6 matrix whose columns give magnitudes that pin down every
vector of C^3 up to a unimodular factor and complex conjugation.
"""

import numpy as np

from cprpw.finite import (
    CprMatrix,
    certify_cpr,
    cpr_distance,
    det3_criterion,
    example_matrix,
    magnitude_measurements,
)

# The columns are the measurement vectors v_1 .. v_6
V = example_matrix()
print(V.columns.real.astype(int))

# Six vectors certify through one 6 x 6 determinant of quadratic forms
print("det3 =", det3_criterion(V.columns.real.T))
print("certified:", certify_cpr(V))

# A vector and its conjugate (with any phase) give identical magnitudes
g = np.random.default_rng(0)
x = g.standard_normal(3) + 1j * g.standard_normal(3)
y = np.exp(0.9j) * x.conj()
print(magnitude_measurements(V, x))
print(magnitude_measurements(V, y))
print("distance between the classes:", cpr_distance(x, y))

# Three repeated directions are not enough
bad = CprMatrix(np.column_stack([np.eye(3), np.eye(3)]))
print("identity twice certified:", certify_cpr(bad))
