"""Finitely supported signals in the Paley-Wiener space PW_pi.

A signal is stored by its integer samples ``c_n = f(n)`` on ``[n_min, n_max]``
and evaluated through the cardinal series ``f(t) = sum c_n sinc(t - n)``
with the normalised ``sinc(x) = sin(pi x) / (pi x)``.

Moduli squared ``|h|^2`` of such signals have band ``2 pi`` and are carried
as samples on the half-integer grid (:class:`HalfGridSamples`).
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd

import numpy as np

__all__ = [
    "BandlimitedSignal",
    "ShiftScheme",
    "HalfGridSamples",
    "NearZeroError",
    "InconsistentDataError",
    "sinc_matrix",
    "dsinc_matrix",
    "evaluate",
    "sharp",
    "derivative",
    "structured_convolution",
    "magnitude_squared_coeffs",
    "resample_magnitudes",
    "conjugate_sampling_map",
    "theta_prime_squared",
    "shift_group_density",
    "to_fraction",
    "read_signal",
    "write_signal",
]


class NearZeroError(ValueError):
    """The phase derivative is undefined where the signal vanishes."""


class InconsistentDataError(ValueError):
    """Resampled squared magnitudes came out clearly negative."""


def _reduced(u, nodes):
    u = np.asarray(u, dtype=float)[..., None]
    nodes = np.asarray(nodes)
    k = np.rint(u)
    # sin(pi (u - n)) = (-1)^(k - n) sin(pi (u - k)), with u - k computed exactly
    r = u - k
    sign = 1.0 - 2.0 * ((k - nodes) % 2)
    return u - nodes, r, sign


def sinc_matrix(u, nodes):
    """``sinc(u - n)`` for every evaluation point ``u`` and integer node ``n``.

    Exact (0 or 1) when ``u`` is an integer.
    """
    x, r, sign = _reduced(u, nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sign * np.sin(np.pi * r) / (np.pi * x)
    return np.where(x == 0, 1.0, out)


def dsinc_matrix(u, nodes):
    """``sinc'(u - n)``; ``sinc'(x) = cos(pi x)/x - sin(pi x)/(pi x^2)``."""
    x, r, sign = _reduced(u, nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sign * (np.cos(np.pi * r) / x - np.sin(np.pi * r) / (np.pi * x * x))
    small = np.abs(x) < 1e-3
    series = -(np.pi**2) * x / 3 + np.pi**4 * x**3 / 30
    return np.where(small, series, out)


@dataclass(frozen=True)
class BandlimitedSignal:
    """Signal with integer samples ``coefficients`` starting at ``n_min``."""

    n_min: int
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).ravel()
        if c.size == 0:
            raise ValueError("a signal needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "n_min", int(self.n_min))

    @classmethod
    def from_dict(cls, samples):
        """Build from a mapping ``{n: f(n)}``; absent indices are zero."""
        if not samples:
            return cls(0, [0.0])
        lo, hi = min(samples), max(samples)
        c = np.zeros(hi - lo + 1, dtype=complex)
        for n, v in samples.items():
            c[n - lo] = v
        return cls(lo, c)

    @classmethod
    def delta(cls, n=0):
        return cls(n, [1.0])

    @property
    def n_max(self):
        return self.n_min + self.coefficients.size - 1

    @property
    def support(self):
        return np.arange(self.n_min, self.n_max + 1)

    def __call__(self, t):
        return evaluate(self, t)

    def __mul__(self, scalar):
        return BandlimitedSignal(self.n_min, self.coefficients * scalar)

    __rmul__ = __mul__

    def coefficient(self, n):
        i = int(n) - self.n_min
        return self.coefficients[i] if 0 <= i < self.coefficients.size else 0j

    def on_support(self, n_min, n_max):
        """Coefficients re-indexed onto ``[n_min, n_max]`` (zero padded, truncated)."""
        return np.array([self.coefficient(n) for n in range(n_min, n_max + 1)])


def evaluate(f, t):
    """``f(t) = sum_n c_n sinc(t - n)``; scalar in, scalar out."""
    scalar = np.ndim(t) == 0
    out = sinc_matrix(np.atleast_1d(t), f.support) @ f.coefficients
    return out[0] if scalar else out


def sharp(f):
    """``f^#(z) = conj(f(conj z))``: conjugated coefficients."""
    return BandlimitedSignal(f.n_min, f.coefficients.conj())


def derivative(f, t):
    """``f'(t)`` from the differentiated cardinal series."""
    scalar = np.ndim(t) == 0
    out = dsinc_matrix(np.atleast_1d(t), f.support) @ f.coefficients
    return out[0] if scalar else out


def to_fraction(x):
    """Exact rational from int, Fraction or decimal string / float literal."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise ValueError(f"not a rational number: {x!r}")
        return Fraction(repr(float(x)))
    raise TypeError(f"shifts must be rational, got {type(x).__name__}")


@dataclass(frozen=True)
class ShiftScheme:
    """Rational shifts ``b_k`` and the sample grid ``t_n = offset + n * step``."""

    shifts: tuple
    step: Fraction = Fraction(1, 2)
    offset: Fraction = Fraction(0)

    def __post_init__(self):
        shifts = tuple(to_fraction(b) for b in self.shifts)
        if len(shifts) < 1:
            raise ValueError("at least one shift is required")
        if len(set(shifts)) != len(shifts):
            raise ValueError(f"shifts must be distinct: {shifts}")
        step = to_fraction(self.step)
        if step <= 0:
            raise ValueError("grid step must be positive")
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "offset", to_fraction(self.offset))

    @property
    def K(self):
        return len(self.shifts)

    def grid_point(self, n):
        return self.offset + n * self.step

    def shift_steps(self):
        """Shifts as integer multiples of the grid step, or None if off-lattice."""
        q = [b / self.step for b in self.shifts]
        if all(x.denominator == 1 for x in q):
            return [int(x) for x in q]
        return None


def shift_group_density(scheme):
    """Beurling density of the group generated by the shifts.

    For rationals ``p_k / q_k`` the group is ``g Z`` with
    ``g = gcd(numerators over the common denominator) / common denominator``;
    the density is ``1 / g``.
    """
    shifts = scheme.shifts if isinstance(scheme, ShiftScheme) else [to_fraction(b) for b in scheme]
    if all(b == 0 for b in shifts):
        raise ValueError("all shifts are zero; the group is trivial")
    L = reduce(lambda a, b: a * b // gcd(a, b), (b.denominator for b in shifts), 1)
    g = reduce(gcd, (abs(b.numerator * (L // b.denominator)) for b in shifts), 0)
    return Fraction(L, g)


def structured_convolution(v, scheme, f, t):
    """``(v * f)(t) = sum_k conj(v_k) f(t + b_k)``."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (scheme.K,):
        raise ValueError(f"dimension mismatch: {v.shape[0] if v.ndim else 0} != {scheme.K} shifts")
    t = np.asarray(t, dtype=float)
    b = np.array([float(s) for s in scheme.shifts])
    vals = evaluate(f, (t[..., None] + b).ravel()).reshape(t.shape + b.shape)
    return vals @ v.conj()


@dataclass(frozen=True)
class HalfGridSamples:
    """Samples ``g(m / 2)`` for ``m = m_min .. m_min + len - 1`` of a band-2pi function."""

    m_min: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "m_min", int(self.m_min))

    @property
    def m_max(self):
        return self.m_min + self.values.size - 1

    @property
    def nodes(self):
        return np.arange(self.m_min, self.m_max + 1)

    def evaluate(self, t):
        """Double-rate series ``sum_m g(m/2) sinc(2t - m)``."""
        scalar = np.ndim(t) == 0
        out = sinc_matrix(2.0 * np.atleast_1d(t), self.nodes) @ self.values
        return out[0] if scalar else out


def magnitude_squared_coeffs(h, m_min=-80, m_max=80):
    """Half-grid samples ``|h(m/2)|^2`` for ``m_min <= m <= m_max``.

    ``h`` is a :class:`BandlimitedSignal` or any callable returning complex
    values on arrays of real points.
    """
    m = np.arange(m_min, m_max + 1)
    vals = np.asarray(h(m / 2.0), dtype=complex)
    return HalfGridSamples(m_min, np.abs(vals) ** 2)


def resample_magnitudes(samples, beta, m, sqrt=False, neg_tol=1e-10):
    """Evaluate the double-rate series at the shifted points ``m/2 - beta``.

    Values in ``(-neg_tol, 0)`` are round-off and clamp to zero.  With
    ``sqrt=True`` the moduli are returned instead of their squares.

    Raises
    ------
    InconsistentDataError
        If a value is below ``-neg_tol``.
    """
    t = np.asarray(m, dtype=float) / 2.0 - float(beta)
    g = np.atleast_1d(samples.evaluate(t))
    if np.any(g < -neg_tol):
        raise InconsistentDataError(
            f"resampled squared magnitude {g.min():.3e} is negative beyond {neg_tol:g}"
        )
    g = np.maximum(g, 0.0)
    out = np.sqrt(g) if sqrt else g
    return out.reshape(np.shape(t))


def conjugate_sampling_map(f, grid):
    """Phaseless data ``(|f(t_n)|, |f'(t_n)|)`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    return np.abs(evaluate(f, grid)), np.abs(derivative(f, grid))


def theta_prime_squared(f, t, eps=1e-12):
    """Squared phase derivative from moduli data only.

    Uses ``(theta')^2 = f' f'^# / (f f^#) - [(f f^#)']^2 / (4 (f f^#)^2)``
    with every factor evaluated on the real axis.

    Raises
    ------
    NearZeroError
        If ``|f(t)|^2 <= eps``.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    fs = sharp(f)
    ff = (evaluate(f, t) * evaluate(fs, t)).real
    if np.any(ff <= eps):
        raise NearZeroError(f"|f(t)|^2 = {ff.min():.3e} is too small")
    d, ds = derivative(f, t), derivative(fs, t)
    dd = (d * ds).real
    dff = (d * evaluate(fs, t) + evaluate(f, t) * ds).real
    out = dd / ff - dff**2 / (4 * ff**2)
    return float(out[0]) if scalar else out


def read_signal(path):
    """Parse ``n re im`` lines; blank lines and ``#`` comments are skipped."""
    samples = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            parts = s.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'n re im', got {line.strip()!r}")
            try:
                n = int(parts[0])
                v = complex(float(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if n in samples:
                raise ValueError(f"{path}:{lineno}: duplicate index {n}")
            samples[n] = v
    return BandlimitedSignal.from_dict(samples)


def write_signal(path, f):
    with open(path, "w") as fh:
        for n, c in zip(f.support, f.coefficients):
            fh.write(f"{int(n)} {float(c.real)!r} {float(c.imag)!r}\n")
