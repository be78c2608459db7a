"""Gerchberg-Saxton alternating projections for phaseless data.

The iteration alternates between the range of ``V^*`` and the set of
vectors with prescribed entry moduli::

    x_{n+1} = S(V^* V^+ x_n)

where ``V^+`` is the Moore-Penrose inverse of ``V^*`` and ``S`` rescales
every entry to the measured modulus.  The estimate of the unknown vector
is ``V^+ x_n``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as _rng
from .finite import CprMatrix, cpr_distance_batch

__all__ = [
    "GsConfig",
    "GsTrace",
    "PinvOperator",
    "RankDeficiencyError",
    "build_pinv",
    "project_magnitudes",
    "gs_step",
    "gs_solve",
    "gs_solve_batch",
    "gs_multistart",
    "MultistartResult",
    "write_trace_csv",
]

SV_RTOL = 1e-12


class RankDeficiencyError(ValueError):
    """``V^*`` is not injective, so ``V`` cannot do conjugate phase retrieval."""


@dataclass(frozen=True)
class GsConfig:
    max_iterations: int = 900
    tolerance: float = 1e-8
    restarts: int = 100
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if int(self.restarts) < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class GsTrace:
    """Per-iteration diagnostics of one run.

    ``residual[n]`` and ``epsilon[n]`` refer to the iterate ``x_n`` for
    ``n = 0 .. max_iterations``; ``epsilon`` is None without ground truth.
    Convergence is judged on ``epsilon`` when present, else on ``residual``.
    """

    residual: np.ndarray
    epsilon: Optional[np.ndarray]
    tolerance: float
    converged: bool = field(init=False)
    iterations_to_threshold: Optional[int] = field(init=False)

    def __post_init__(self):
        errs = self.errors
        below = np.flatnonzero(errs < self.tolerance)
        self.converged = bool(below.size)
        self.iterations_to_threshold = int(below[0]) if below.size else None

    @property
    def errors(self):
        return self.epsilon if self.epsilon is not None else self.residual

    @property
    def final_error(self):
        return float(self.errors[-1])


@dataclass(frozen=True)
class PinvOperator:
    """``V^*`` together with its SVD-based Moore-Penrose inverse."""

    analysis: np.ndarray  # V^*, M x K
    pinv: np.ndarray  # V^+, K x M
    singular_values: np.ndarray
    rank: int

    @property
    def K(self):
        return self.pinv.shape[0]

    @property
    def M(self):
        return self.pinv.shape[1]

    @property
    def range_projector(self):
        """``V^* V^+``, the orthogonal projector onto the range of ``V^*``."""
        return self.analysis @ self.pinv


def build_pinv(V):
    """Precompute the pseudoinverse of ``V^*``.

    Singular values below ``1e-12 * sigma_max`` count as zero.

    Raises
    ------
    RankDeficiencyError
        If ``rank(V) < K``.
    """
    V = V if isinstance(V, CprMatrix) else CprMatrix(V)
    A = V.adjoint
    u, s, vh = np.linalg.svd(A, full_matrices=False)
    cutoff = SV_RTOL * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    if rank < V.K:
        raise RankDeficiencyError(f"V has rank {rank} < K={V.K}; V^* is not injective")
    pinv = (vh.conj().T / s) @ u.conj().T
    for a in (A, pinv, s):
        a.setflags(write=False)
    return PinvOperator(analysis=A, pinv=pinv, singular_values=s, rank=rank)


def project_magnitudes(w, mags):
    """Give each entry of ``w`` the modulus in ``mags``, keeping its phase.

    Zero entries get phase 1.  Works on any broadcastable shapes.
    """
    w = np.asarray(w, dtype=complex)
    mags = np.asarray(mags, dtype=float)
    if w.shape[-1:] != mags.shape[-1:]:
        raise ValueError(f"length mismatch: {w.shape} vs {mags.shape}")
    a = np.abs(w)
    nz = a > 0
    # real and imaginary parts separately: complex division overflows for subnormal |w|
    re = np.divide(w.real, a, out=np.ones_like(a), where=nz)
    im = np.divide(w.imag, a, out=np.zeros_like(a), where=nz)
    return mags * (re + 1j * im)


def gs_step(op, x, mags):
    """One alternating-projection step ``S(V^* V^+ x)``."""
    x = np.asarray(x, dtype=complex)
    return project_magnitudes(x @ op.range_projector.T, mags)


def _residual(P, x, mags):
    return np.linalg.norm(mags - np.abs(x @ P.T), axis=-1)


def gs_solve_batch(op, mags, initial_phases, max_iterations, truth=None, record=True):
    """Run many independent GS iterations at once.

    Parameters
    ----------
    op : PinvOperator
    mags : (B, M) array
    initial_phases : (B, M) unimodular array
    max_iterations : int
    truth : (B, K) array, optional
        Ground truth for the equivalence-class error ``epsilon``.
    record : bool
        Keep the full per-iteration history; otherwise only the final values.

    Returns
    -------
    x : (B, M) final iterates
    residual : (B, N + 1) or (B,) array
    epsilon : same shape as ``residual`` or None
    """
    mags = np.atleast_2d(np.asarray(mags, dtype=float))
    x = mags * np.asarray(initial_phases, dtype=complex)
    P = op.range_projector
    PT = P.T
    Vp = op.pinv

    def errors(x):
        r = _residual(P, x, mags)
        e = None if truth is None else cpr_distance_batch(truth, x @ Vp.T)
        return r, e

    if not record:
        for _ in range(max_iterations):
            x = project_magnitudes(x @ PT, mags)
        r, e = errors(x)
        return x, r, e

    n = max_iterations + 1
    res = np.empty((x.shape[0], n))
    eps = None if truth is None else np.empty((x.shape[0], n))
    for it in range(n):
        if it:
            x = project_magnitudes(x @ PT, mags)
        r, e = errors(x)
        res[:, it] = r
        if eps is not None:
            eps[:, it] = e
    return x, res, eps


def gs_solve(op, mags, initial_phases, config=GsConfig(), truth=None):
    """Single-start GS from ``x_0 = alpha * mags``.

    Returns the estimate ``V^+ x_N`` and a :class:`GsTrace`.  Failure to
    converge is reported in the trace, never raised.
    """
    mags = np.asarray(mags, dtype=float)
    alpha = np.asarray(initial_phases, dtype=complex)
    if alpha.shape != mags.shape or mags.shape != (op.M,):
        raise ValueError("mags and initial_phases must both have length M")
    if not np.allclose(np.abs(alpha), 1.0, atol=1e-12):
        raise ValueError("initial phases must be unimodular")
    t = None if truth is None else np.asarray(truth, dtype=complex)[None, :]
    x, res, eps = gs_solve_batch(op, mags[None], alpha[None], int(config.max_iterations), t)
    trace = GsTrace(res[0], None if eps is None else eps[0], config.tolerance)
    return x[0] @ op.pinv.T, trace


@dataclass
class MultistartResult:
    estimate: np.ndarray
    best_restart: int
    best_residual: float
    residuals: np.ndarray
    traces: Optional[list] = None

    @property
    def restarts(self):
        return int(self.residuals.size)


def multistart_phases(config, M, *indices):
    """Initial phases for all restarts, drawn from stream ``(seed, indices)``."""
    g = _rng.stream(config.rng_seed, "column-phases", *indices)
    return _rng.unimodular(g, (int(config.restarts), M))


def gs_multistart(op, mags, config=GsConfig(), stream_index=(0,), keep_traces=False):
    """Best of ``config.restarts`` randomly initialised GS runs.

    The winner minimises ``|| mags - |V^* V^+ x_k| ||``.
    """
    mags = np.asarray(mags, dtype=float)
    alpha = multistart_phases(config, op.M, *stream_index)
    batch = np.broadcast_to(mags, alpha.shape)
    if keep_traces:
        x, res, _ = gs_solve_batch(op, batch, alpha, int(config.max_iterations))
        traces = [GsTrace(r, None, config.tolerance) for r in res]
        final = res[:, -1]
    else:
        x, final, _ = gs_solve_batch(op, batch, alpha, int(config.max_iterations), record=False)
        traces = None
    k = int(np.argmin(final))
    return MultistartResult(
        estimate=x[k] @ op.pinv.T,
        best_restart=k,
        best_residual=float(final[k]),
        residuals=final,
        traces=traces,
    )


def write_trace_csv(path_or_file, rows):
    """Write trace rows ``(trial_id, restart_id, iteration, residual, epsilon)``.

    Floats use 12 significant digits; a missing epsilon is written empty.
    """
    import csv

    def fmt(v):
        return "" if v is None else f"{v:.12g}"

    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_id", "restart_id", "iteration", "residual", "epsilon"])
        for trial, restart, it, r, e in rows:
            w.writerow([int(trial), int(restart), int(it), fmt(r), fmt(e)])
    finally:
        if own:
            fh.close()
