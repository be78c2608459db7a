"""Seeded counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, purpose, *indices)``.  Streams for different trials, columns or
restarts are therefore independent of evaluation order, which keeps
threaded runs bitwise reproducible.
"""
import zlib

import numpy as np

__all__ = ["stream", "unimodular", "uniform_complex", "PURPOSES"]

PURPOSES = (
    "gs-target",
    "gs-phases",
    "signal",
    "beta",
    "column-phases",
)


def _tag(purpose):
    return zlib.crc32(purpose.encode("ascii"))


def stream(seed, purpose, *indices):
    """Return a ``numpy.random.Generator`` for one named stream.

    Parameters
    ----------
    seed : int
        Master 64-bit seed.
    purpose : str
        Name of the stream family, e.g. ``"gs-phases"``.
    *indices : int
        Trial / column / restart indices selecting the sub-stream.
    """
    if seed is None:
        raise ValueError("a seed is required for reproducible streams")
    key = (_tag(purpose),) + tuple(int(i) & 0xFFFFFFFF for i in indices)
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def unimodular(rng, size):
    """Phases ``exp(2 pi i u)`` with ``u`` uniform on [0, 1)."""
    return np.exp(2j * np.pi * rng.random(size))


def uniform_complex(rng, size):
    """Complex entries with real and imaginary parts uniform on [0, 1)."""
    u = rng.random((2,) + tuple(np.atleast_1d(size)))
    return u[0] + 1j * u[1]
