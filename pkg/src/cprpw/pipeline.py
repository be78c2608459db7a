"""End-to-end conjugate phase retrieval of bandlimited signals.

Stages (structured-convolution scheme, default lattice ``t_n = n/2`` and
shifts ``(0, 1/2, 1)``):

1. ``generate_measurements``: ``R[m, n] = |v_m * f(t_n)|``.
2. ``shift_magnitudes``: resample the squared rows at ``t_n - beta``.
3. ``columnwise_recover``: multistart GS on each column of ``R_beta``.
4. ``stitch``: align phase and conjugation of neighbouring columns on
   their shared samples.
5. ``assemble_signal``: least squares for the integer samples on the
   known support.

Rows of ``R`` whose stencils are translates of each other on the sample
lattice carry the same function sampled at shifted points; they are
grouped into :class:`StencilClass` objects and merged.
"""
import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from . import rng as _rng
from .finite import CprMatrix, certify_cpr, example_matrix, gram
from .gs import GsConfig, build_pinv, gs_solve_batch, multistart_phases
from .signal import (
    BandlimitedSignal,
    HalfGridSamples,
    ShiftScheme,
    evaluate,
    resample_magnitudes,
    shift_group_density,
    sinc_matrix,
)

__all__ = [
    "PipelineConfig",
    "MagnitudeGrid",
    "ColumnEstimate",
    "StitchResult",
    "ReconstructionResult",
    "ConfigError",
    "IllConditionedError",
    "OverlapDegenerateWarning",
    "default_scheme",
    "nyquist3_scheme",
    "stencil_classes",
    "generate_measurements",
    "check_lattice_redundancy",
    "shift_magnitudes",
    "columnwise_recover",
    "stitch",
    "assemble_signal",
    "relative_error",
    "random_signal",
    "run_algorithm1",
    "run_algorithm2",
    "oversampling_factor",
]

ERROR_GRID = np.arange(-40, 41) / 2.0


class ConfigError(ValueError):
    """Invalid pipeline configuration (matrix or shift scheme)."""


class IllConditionedError(ValueError):
    """The final least-squares system is too ill-conditioned to trust."""


class OverlapDegenerateWarning(RuntimeWarning):
    pass


def default_scheme():
    return ShiftScheme((0, Fraction(1, 2), 1), step=Fraction(1, 2))


def nyquist3_scheme():
    """Shifts ``(1, 0, -1)`` on the integer grid (three times Nyquist)."""
    return ShiftScheme((1, 0, -1), step=1)


@dataclass(frozen=True)
class PipelineConfig:
    """Configuration of one reconstruction run.

    ``columns`` are the grid indices ``n`` where vectors are recovered.
    ``series_window`` is the index range of measured samples feeding the
    double-rate interpolation; it should be wider than ``columns``.
    ``neg_tol`` is relative to the peak of each resampled row.
    """

    matrix: CprMatrix = field(default_factory=example_matrix)
    scheme: ShiftScheme = field(default_factory=default_scheme)
    beta: Optional[float] = None
    gs: GsConfig = field(default_factory=GsConfig)
    columns: tuple = (-40, 40)
    series_window: tuple = (-80, 80)
    support: tuple = (-10, 10)
    stitch_threshold: float = 1e-6
    neg_tol: float = 1e-3
    max_condition: float = 1e8

    def validate(self):
        if self.matrix.K != self.scheme.K:
            raise ConfigError(f"matrix has K={self.matrix.K} rows but scheme has {self.scheme.K} shifts")
        if not certify_cpr(self.matrix):
            raise ConfigError("measurement matrix does not do conjugate phase retrieval")
        if shift_group_density(self.scheme) <= 1:
            raise ConfigError("shift group must have Beurling density greater than one")
        if self.scheme.shift_steps() is None:
            raise ConfigError("shifts must lie on the sample lattice")
        if self.columns[0] > self.columns[1] or self.support[0] > self.support[1]:
            raise ConfigError("empty column or support range")
        if self.beta is not None and not 0 <= self.beta < 1:
            raise ConfigError("beta must lie in [0, 1)")
        return self


@dataclass(frozen=True)
class MagnitudeGrid:
    """Phaseless samples: ``values[i, j]`` for measurement ``rows[i]`` at grid index ``n_min + j``.

    The sample points are ``offset + n * step - beta``.
    """

    values: np.ndarray
    n_min: int
    rows: tuple
    step: Fraction = Fraction(1, 2)
    offset: Fraction = Fraction(0)
    beta: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != len(self.rows):
            raise ValueError("values must be (len(rows), N)")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("magnitudes must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rows", tuple(int(r) for r in self.rows))

    @property
    def n_max(self):
        return self.n_min + self.values.shape[1] - 1

    @property
    def indices(self):
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def points(self):
        return float(self.offset) + self.indices * float(self.step) - self.beta

    def row(self, m):
        return self.values[self.rows.index(m)]

    def column(self, n):
        return self.values[:, n - self.n_min]


@dataclass(frozen=True)
class StencilClass:
    """Measurements that are lattice translates of one canonical stencil.

    Member ``m`` satisfies ``|v_m * f(t_n)| = g(t_{n + offsets[m]})`` where
    ``g = |sum_j stencil[j] f(t_{. + j})|``.
    """

    stencil: tuple
    offsets: dict


def _stencil(v, steps):
    coeffs = {}
    for c, d in zip(np.conj(v), steps):
        if c != 0:
            coeffs[d] = coeffs.get(d, 0) + c
    coeffs = {d: c for d, c in coeffs.items() if c != 0}
    if not coeffs:
        return None, 0
    lo = min(coeffs)
    items = sorted((d - lo, c) for d, c in coeffs.items())
    lead = items[0][1]
    unit = lead / abs(lead)
    canon = tuple((d, complex(np.round(c / unit, 12))) for d, c in items)
    return canon, lo


def stencil_classes(V, scheme):
    """Group the columns of ``V`` into lattice-translate classes."""
    steps = scheme.shift_steps()
    if steps is None:
        raise ConfigError("shifts must lie on the sample lattice")
    classes = {}
    for m in range(V.M):
        canon, lo = _stencil(V.columns[:, m], steps)
        if canon is None:
            continue
        classes.setdefault(canon, {})[m] = lo
    return [StencilClass(k, v) for k, v in classes.items()]


def _check_support(f, config):
    lo, hi = config.support
    nz = np.flatnonzero(f.coefficients)
    if nz.size and (f.n_min + nz[0] < lo or f.n_min + nz[-1] > hi):
        raise ConfigError(
            f"signal support [{f.n_min + nz[0]}, {f.n_min + nz[-1]}] exceeds window [{lo}, {hi}]"
        )


def generate_measurements(f, config=None, rows=None, window=None, beta=0.0, check=True):
    """Exact phaseless samples ``R[m, n] = |v_m * f(t_n - beta)|``.

    Parameters
    ----------
    f : BandlimitedSignal
    config : PipelineConfig
    rows : sequence of int, optional
        Columns of ``V`` to measure; all by default.
    window : (int, int), optional
        Grid index range; ``config.series_window`` by default.
    beta : float
        Offset subtracted from every sample point.
    check : bool
        Assert the lattice redundancy between translate rows.
    """
    config = config or PipelineConfig()
    _check_support(f, config)
    scheme, V = config.scheme, config.matrix
    rows = tuple(range(V.M)) if rows is None else tuple(rows)
    lo, hi = window or config.series_window
    n = np.arange(lo, hi + 1)
    t = float(scheme.offset) + n * float(scheme.step) - beta
    b = np.array([float(s) for s in scheme.shifts])
    # (N, K) array of f(t_n + b_k)
    F = evaluate(f, (t[:, None] + b).ravel()).reshape(t.size, b.size)
    vals = np.abs(F @ V.columns[:, list(rows)].conj()).T
    grid = MagnitudeGrid(vals, lo, rows, scheme.step, scheme.offset, beta)
    if check:
        check_lattice_redundancy(grid, config)
    return grid


def check_lattice_redundancy(R, config, atol=1e-12):
    """Rows in one stencil class must agree after shifting by their offsets."""
    for cls in stencil_classes(config.matrix, config.scheme):
        members = [m for m in cls.offsets if m in R.rows]
        for a, b in zip(members, members[1:]):
            s = cls.offsets[b] - cls.offsets[a]
            ra, rb = R.row(a), R.row(b)
            # rb[n] == ra[n + s]
            if s >= 0:
                x, y = ra[s:], rb[: rb.size - s]
            else:
                x, y = ra[: ra.size + s], rb[-s:]
            scale = max(1.0, float(np.max(np.abs(ra), initial=0)))
            if x.size and np.max(np.abs(x - y)) > atol * scale:
                raise AssertionError(f"rows {a} and {b} violate the lattice redundancy")


def _class_samples(R, cls):
    """Squared samples of the class function on the grid indices, averaged over members."""
    acc, cnt = {}, {}
    for m, off in cls.offsets.items():
        if m not in R.rows:
            continue
        sq = R.row(m) ** 2
        for j, v in zip(R.indices + off, sq):
            acc[j] = acc.get(j, 0.0) + v
            cnt[j] = cnt.get(j, 0) + 1
    if not acc:
        return None
    lo, hi = min(acc), max(acc)
    idx = range(lo, hi + 1)
    if any(j not in acc for j in idx):
        raise ValueError("class samples have gaps")
    return lo, np.array([acc[j] / cnt[j] for j in idx])


def _require_half_grid(scheme):
    if scheme.step != Fraction(1, 2) or (scheme.offset * 2).denominator != 1:
        raise ConfigError("double-rate resampling needs the half-integer grid t_n = n/2")


def shift_magnitudes(R, beta, config=None):
    """Six-row magnitude matrix at the shifted points ``t_n - beta``.

    Squares each independent row of ``R``, resamples it with the
    double-rate series and takes square roots.  The result has one row per
    column of ``V`` and one column per index in ``config.columns``.
    """
    config = config or PipelineConfig()
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    _require_half_grid(config.scheme)
    if R.beta != 0.0:
        raise ValueError("input grid must be unshifted")
    V = config.matrix
    c0, c1 = config.columns
    n = np.arange(c0, c1 + 1)
    out = np.zeros((V.M, n.size))
    off2 = int(config.scheme.offset * 2)
    for cls in stencil_classes(V, config.scheme):
        got = _class_samples(R, cls)
        if got is None:
            raise ValueError(f"no measured row for stencil {cls.stencil}")
        lo, sq = got
        samples = HalfGridSamples(lo + off2, sq)
        tol = config.neg_tol * max(float(sq.max()), 1e-300)
        for m, off in cls.offsets.items():
            out[m] = resample_magnitudes(samples, beta, n + off + off2, sqrt=True, neg_tol=tol)
    return MagnitudeGrid(out, c0, tuple(range(V.M)), config.scheme.step, config.scheme.offset, beta)


def derive_rows(R, config, columns):
    """Fill every row of ``V`` from measured translate rows (no resampling)."""
    V = config.matrix
    c0, c1 = columns
    n = np.arange(c0, c1 + 1)
    out = np.zeros((V.M, n.size))
    for cls in stencil_classes(V, config.scheme):
        got = _class_samples(R, cls)
        if got is None:
            raise ValueError(f"no sampled row carries stencil {cls.stencil}")
        lo, sq = got
        for m, off in cls.offsets.items():
            j = n + off - lo
            if j.min() < 0 or j.max() >= sq.size:
                raise ValueError("sampled window too narrow for the requested columns")
            out[m] = np.sqrt(sq[j])
    return MagnitudeGrid(out, c0, tuple(range(V.M)), R.step, R.offset, R.beta)


@dataclass
class ColumnEstimate:
    """Recovered vector ``F(n)`` of shifted samples, up to phase and conjugation."""

    index: int
    vector: np.ndarray
    best_residual: float
    restarts: int
    best_restart: int
    phase: complex = 1.0
    conjugated: bool = False
    colinear: bool = False
    degenerate: bool = False
    mismatch: float = 0.0

    @property
    def aligned(self):
        v = self.vector.conj() if self.conjugated else self.vector
        return self.phase * v


def columnwise_recover(Rb, config=None, stream_index=()):
    """Best-of-restarts GS estimate for every column of ``Rb``.

    All columns and restarts run as one batch; restart phases for column
    ``n`` come from stream ``(seed, *stream_index, n)``.
    """
    config = config or PipelineConfig()
    op = build_pinv(config.matrix)
    gs = config.gs
    ncol = Rb.values.shape[1]
    R = int(gs.restarts)
    mags = Rb.values.T  # (ncol, M)
    alpha = np.concatenate(
        [multistart_phases(gs, op.M, *stream_index, int(n)) for n in Rb.indices]
    )
    batch = np.repeat(mags, R, axis=0)
    x, res, _ = gs_solve_batch(op, batch, alpha, int(gs.max_iterations), record=False)
    res = res.reshape(ncol, R)
    best = np.argmin(res, axis=1)
    xb = x.reshape(ncol, R, -1)[np.arange(ncol), best]
    est = xb @ op.pinv.T
    return [
        ColumnEstimate(int(n), est[i], float(res[i, best[i]]), R, int(best[i]))
        for i, n in enumerate(Rb.indices)
    ]


@dataclass
class StitchResult:
    indices: np.ndarray
    samples: np.ndarray
    columns: list

    @property
    def colinear_count(self):
        return sum(c.colinear for c in self.columns[1:])

    @property
    def degenerate_count(self):
        return sum(c.degenerate for c in self.columns)


def _best_phase(a, w):
    z = np.vdot(w, a)
    return z / abs(z) if abs(z) > 0 else 1.0


def stitch(estimates, config=None, steps=None, degenerate_atol=1e-10):
    """Make neighbouring column estimates consistent and merge them.

    The first column keeps phase 1 and no conjugation.  Each following
    column is compared with its aligned predecessor on the shared grid
    points; of the two conjugation choices, each with its least-squares
    optimal unimodular phase, the one with the smaller mismatch wins.

    Returns a :class:`StitchResult` whose ``samples`` average all aligned
    estimates of each grid index.
    """
    config = config or PipelineConfig()
    steps = config.scheme.shift_steps() if steps is None else list(steps)
    est = sorted(estimates, key=lambda c: c.index)
    if not est:
        raise ValueError("nothing to stitch")
    out = [replace(est[0], phase=1.0, conjugated=False)]
    for cur in est[1:]:
        prev = out[-1]
        pos_prev = {prev.index + d: k for k, d in enumerate(steps)}
        shared = [(pos_prev[cur.index + d], k) for k, d in enumerate(steps) if cur.index + d in pos_prev]
        if len(shared) < 2:
            raise ValueError(f"columns {prev.index} and {cur.index} share fewer than two samples")
        ip, ic = map(list, zip(*shared))
        a = prev.aligned[ip]
        scale = float(np.vdot(a, a).real)
        if np.all(np.abs(a) < degenerate_atol):
            warnings.warn(
                f"overlap at column {cur.index} is numerically zero; carrying phase forward",
                OverlapDegenerateWarning,
                stacklevel=2,
            )
            out.append(replace(cur, phase=1.0, conjugated=prev.conjugated, degenerate=True))
            continue
        det = a[0] * np.conj(a[1]) - np.conj(a[0]) * a[1]
        colinear = bool(abs(det) < config.stitch_threshold * scale)
        best = None
        for conj in (False, True):
            w = cur.vector.conj() if conj else cur.vector
            mu = _best_phase(a, w[ic])
            mis = float(np.linalg.norm(a - mu * w[ic]))
            if best is None or mis < best[0]:
                best = (mis, conj, mu)
        mis, conj, mu = best
        out.append(replace(cur, phase=mu, conjugated=conj, colinear=colinear, mismatch=mis))
    acc, cnt = {}, {}
    for c in out:
        for k, d in enumerate(steps):
            j = c.index + d
            acc[j] = acc.get(j, 0) + c.aligned[k]
            cnt[j] = cnt.get(j, 0) + 1
    idx = np.array(sorted(acc))
    return StitchResult(idx, np.array([acc[j] / cnt[j] for j in idx]), out)


def assemble_signal(points, samples, config=None):
    """Least-squares integer samples on ``config.support`` from values at ``points``.

    Raises
    ------
    IllConditionedError
        If the normal equations have condition number above ``config.max_condition``.
    """
    config = config or PipelineConfig()
    lo, hi = config.support
    nodes = np.arange(lo, hi + 1)
    points = np.asarray(points, dtype=float)
    samples = np.asarray(samples, dtype=complex)
    if points.size < 2 * nodes.size:
        raise ValueError(f"need at least {2 * nodes.size} samples, got {points.size}")
    A = sinc_matrix(points, nodes)
    s = np.linalg.svd(A, compute_uv=False)
    cond = (s[0] / s[-1]) ** 2 if s[-1] > 0 else np.inf
    if cond > config.max_condition:
        raise IllConditionedError(f"normal-equation condition number {cond:.3e} exceeds {config.max_condition:g}")
    c, *_ = np.linalg.lstsq(A, samples, rcond=None)
    return BandlimitedSignal(lo, c)


def relative_error(f, r, grid=ERROR_GRID):
    """Normalised rank-one distance between ``f`` and ``r`` sampled on ``grid``.

    ``min(||ff* - rr*||_F, ||ff* - conj(r)conj(r)*||_F) / ||ff*||_F``; the
    default grid is ``-20, -19.5, ..., 20``.
    """
    fv = evaluate(f, grid)
    rv = evaluate(r, grid)
    gf = gram(fv)
    nf = np.linalg.norm(gf)
    if nf == 0:
        raise ValueError("ground truth is zero")
    gr = gram(rv)
    d = min(np.linalg.norm(gf - gr), np.linalg.norm(gf - gr.conj()))
    return float(d / nf)


def random_signal(rng, support=(-10, 10), zero_at_origin=True):
    """Coefficients with real and imaginary parts uniform on [0, 1)."""
    lo, hi = support
    c = _rng.uniform_complex(rng, hi - lo + 1)
    if zero_at_origin and lo <= 0 <= hi:
        c[-lo] = 0
    return BandlimitedSignal(lo, c)


@dataclass
class ReconstructionResult:
    beta: float
    indices: np.ndarray
    points: np.ndarray
    samples: np.ndarray
    estimate: BandlimitedSignal
    columns: list
    relative_error: Optional[float] = None
    algorithm: int = 1

    @property
    def colinear_count(self):
        return sum(c.colinear for c in self.columns[1:])

    @property
    def degenerate_overlap(self):
        """Some, but not all, overlaps failed the colinearity test, or an overlap vanished."""
        flags = [c.colinear for c in self.columns[1:]]
        partial = any(flags) and not all(flags)
        return partial or any(c.degenerate for c in self.columns)

    @property
    def max_column_residual(self):
        return max(c.best_residual for c in self.columns)

    def to_dict(self, config=None):
        d = {
            "algorithm": self.algorithm,
            "beta": self.beta,
            "relative_error": self.relative_error,
            "degenerate_overlap": self.degenerate_overlap,
            "colinear_overlaps": self.colinear_count,
            "columns": [
                {
                    "index": c.index,
                    "best_residual": c.best_residual,
                    "restarts": c.restarts,
                    "best_restart": c.best_restart,
                    "conjugated": c.conjugated,
                    "colinear": c.colinear,
                    "degenerate": c.degenerate,
                    "mismatch": c.mismatch,
                }
                for c in self.columns
            ],
            "coefficients": [
                {"n": int(n), "re": float(c.real), "im": float(c.imag)}
                for n, c in zip(self.estimate.support, self.estimate.coefficients)
            ],
        }
        if config is not None:
            d["config"] = config_echo(config)
        return d

    def write_json(self, path, config=None):
        with open(path, "w") as fh:
            json.dump(self.to_dict(config), fh, indent=2)
            fh.write("\n")

    def write_samples_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,re,im\n")
            for t, v in zip(self.points, self.samples):
                fh.write(f"{t:.12g},{v.real:.12g},{v.imag:.12g}\n")


def config_echo(config):
    gs = asdict(config.gs)
    return {
        "matrix": [[str(complex(v)) for v in row] for row in config.matrix.columns],
        "shifts": [str(b) for b in config.scheme.shifts],
        "step": str(config.scheme.step),
        "offset": str(config.scheme.offset),
        "beta": config.beta,
        "gs": gs,
        "columns": list(config.columns),
        "series_window": list(config.series_window),
        "support": list(config.support),
        "stitch_threshold": config.stitch_threshold,
    }


def _draw_beta(config, stream_index):
    if config.beta is not None:
        return float(config.beta)
    return float(_rng.stream(config.gs.rng_seed, "beta", *stream_index).random())


def run_algorithm1(source, config=None, stream_index=(0, 0)):
    """Reconstruct ``[f]`` from structured-convolution magnitudes.

    ``source`` is either a :class:`BandlimitedSignal` (benchmark mode: data
    are generated and the relative error is attached) or an unshifted
    :class:`MagnitudeGrid` (data mode).
    """
    config = (config or PipelineConfig()).validate()
    truth = source if isinstance(source, BandlimitedSignal) else None
    R = generate_measurements(truth, config) if truth is not None else source
    beta = _draw_beta(config, stream_index)
    Rb = shift_magnitudes(R, beta, config)
    cols = columnwise_recover(Rb, config, stream_index)
    st = stitch(cols, config)
    pts = float(config.scheme.offset) + st.indices * float(config.scheme.step) - beta
    r = assemble_signal(pts, st.samples, config)
    err = relative_error(truth, r) if truth is not None else None
    return ReconstructionResult(beta, st.indices, pts, st.samples, r, st.columns, err, 1)


ALG2_ROWS = (0, 3, 4)


def run_algorithm2(f, beta=None, config=None, stream_index=(0, 0), rows=ALG2_ROWS):
    """Reconstruct ``[f]`` from three magnitude rows on the shifted integer grid.

    Samples ``|v_m * f(n - beta)|`` for the ``rows`` of ``V`` with shifts
    ``(1, 0, -1)``; the remaining rows of ``V`` are translates of these, so
    every column gets the full set of magnitudes without resampling.
    """
    base = config or PipelineConfig()
    cfg = replace(base, scheme=nyquist3_scheme(), beta=beta if beta is not None else base.beta)
    if cfg.matrix.K != 3 or not certify_cpr(cfg.matrix):
        raise ConfigError("measurement matrix does not do conjugate phase retrieval")
    beta = _draw_beta(cfg, stream_index)
    c0, c1 = cfg.columns
    steps = cfg.scheme.shift_steps()
    pad = max(steps) - min(steps)
    R = generate_measurements(f, cfg, rows=rows, window=(c0 - pad, c1 + pad), beta=beta)
    Rb = derive_rows(R, cfg, cfg.columns)
    cols = columnwise_recover(Rb, cfg, stream_index)
    st = stitch(cols, cfg)
    pts = st.indices.astype(float) - beta
    r = assemble_signal(pts, st.samples, cfg)
    return ReconstructionResult(beta, st.indices, pts, st.samples, r, st.columns, relative_error(f, r), 2)


def oversampling_factor(config, rows=None):
    """Independent sampled functions times the sampling rate relative to Nyquist.

    Rows in one stencil class are the same function on a shifted grid, so
    only one per class counts.
    """
    classes = stencil_classes(config.matrix, config.scheme)
    if rows is not None:
        classes = [c for c in classes if any(m in rows for m in c.offsets)]
    return Fraction(len(classes)) / config.scheme.step
