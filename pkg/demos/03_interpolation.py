"""
Bandlimited signals and their squared moduli
============================================

A signal is held by its integer samples and evaluated with the cardinal
series.  Its squared modulus has twice the band, so samples at half-integers
determine it, and it can be resampled on any shifted grid.
"""

import numpy as np

from cprpw import rng
from cprpw.pipeline import random_signal
from cprpw.signal import (
    derivative,
    magnitude_squared_coeffs,
    resample_magnitudes,
    theta_prime_squared,
)

f = random_signal(rng.stream(3, "signal", 0))
print("support:", f.n_min, "..", f.n_max, " f(0) =", f(0.0))

# Between integers the series interpolates; at integers it is exact
print("f(2.5) =", f(2.5))
print("f'(2.5) =", derivative(f, 2.5))

# |f|^2 from its half-integer samples; the window controls the truncation error
t = np.linspace(-9.7, 9.3, 200)
exact = np.abs(f(t)) ** 2
for half_width in (80, 160, 320):
    s = magnitude_squared_coeffs(f, -half_width, half_width)
    print(f"window +-{half_width:3d}: max error {np.max(np.abs(s.evaluate(t) - exact)):.2e}")

# Shift the squared moduli by beta without ever touching the phase
beta = 0.2119
s = magnitude_squared_coeffs(f)
m = np.arange(-20, 21)
shifted = resample_magnitudes(s, beta, m, neg_tol=1e-3)
print("resampling error relative to peak:",
      np.max(np.abs(shifted - np.abs(f(m / 2 - beta)) ** 2)) / shifted.max())

# The squared phase derivative only needs moduli of f and f'
print("(theta')^2 at 2.5:", theta_prime_squared(f, 2.5))
