"""Conjugate phase retrieval in finite dimensions.

Vectors are plain 1-d complex numpy arrays.  A measurement matrix stores
its measurement vectors as columns, so ``V`` is ``K x M`` and the phaseless
data of ``x`` is ``|V^* x|``.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = [
    "CprMatrix",
    "UnsupportedDimensionError",
    "example_matrix",
    "as_vector",
    "gram",
    "magnitude_measurements",
    "det2_criterion",
    "det3_criterion",
    "is_nonzero_det",
    "certify_cpr",
    "cpr_distance",
    "cpr_distance_batch",
    "read_matrix",
    "write_matrix",
]

DET_RTOL = 1e-9


class UnsupportedDimensionError(ValueError):
    """Raised when no certification criterion is available for a matrix."""


@dataclass(frozen=True)
class CprMatrix:
    """A ``K x M`` matrix whose columns are measurement vectors."""

    columns: np.ndarray

    def __post_init__(self):
        a = np.array(self.columns, dtype=complex)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"measurement matrix must be 2-d and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("measurement matrix has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "columns", a)

    @property
    def K(self):
        return self.columns.shape[0]

    @property
    def M(self):
        return self.columns.shape[1]

    @property
    def real_valued(self):
        return bool(np.all(self.columns.imag == 0))

    @property
    def adjoint(self):
        """``V^*``, the ``M x K`` analysis operator."""
        return self.columns.conj().T

    def submatrix(self, cols):
        return CprMatrix(self.columns[:, list(cols)])


def example_matrix():
    """The 3 x 6 real matrix doing conjugate phase retrieval on C^3."""
    return CprMatrix(
        np.array(
            [
                [1, 0, 0, 1, 1, 0],
                [0, 1, 0, -1, 0, 1],
                [0, 0, 1, 0, -1, -1],
            ],
            dtype=float,
        )
    )


def as_vector(x, dim=None):
    v = np.asarray(x, dtype=complex)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    if dim is not None and v.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.size}")
    return v


def gram(v):
    """Rank-one Hermitian outer product ``v v^*``."""
    v = np.asarray(v, dtype=complex)
    return np.multiply.outer(v, v.conj())


def magnitude_measurements(V, x):
    """Phaseless measurements ``|<x, v_j>|`` for every column ``v_j`` of ``V``."""
    V = V if isinstance(V, CprMatrix) else CprMatrix(V)
    x = as_vector(x, V.K)
    return np.abs(V.adjoint @ x)


def _real_rows(vectors, dim):
    a = np.asarray(vectors)
    if np.iscomplexobj(a):
        if np.any(a.imag != 0):
            raise ValueError("determinant criteria are defined for real vectors only")
        a = a.real
    a = a.astype(float)
    if a.shape != (a.shape[0], dim):
        raise ValueError(f"expected vectors in R^{dim}, got shape {a.shape}")
    return a


def _det2_matrix(a, b, c):
    rows = _real_rows([a, b, c], 2)
    x, y = rows[:, 0], rows[:, 1]
    return np.column_stack([x * x, 2 * x * y, y * y])


def det2_criterion(a, b, c):
    """Determinant test for three real vectors in R^2.

    Nonzero exactly when the vectors do conjugate phase retrieval in C^2.
    The 3 x 3 determinant is expanded along the first row.
    """
    m = _det2_matrix(a, b, c)
    return float(
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def _det3_matrix(vectors):
    rows = _real_rows(vectors, 3)
    if rows.shape[0] != 6:
        raise ValueError(f"expected six vectors in R^3, got {rows.shape[0]}")
    x, y, z = rows.T
    return np.column_stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z])


def det3_criterion(*vectors):
    """Determinant test for six real vectors in R^3 (LU with partial pivoting).

    Accepts either six separate vectors or a single ``6 x 3`` array.
    """
    if len(vectors) == 1:
        vectors = vectors[0]
    return float(np.linalg.det(_det3_matrix(vectors)))


def is_nonzero_det(det, matrix, rtol=DET_RTOL):
    """Scale-aware nonzero test: ``|det| > rtol * prod(row norms)``."""
    scale = np.prod(np.linalg.norm(matrix, axis=1))
    return bool(abs(det) > rtol * scale) and scale > 0


def certify_cpr(V, rtol=DET_RTOL):
    """Decide whether a real ``2 x M`` or ``3 x M`` matrix does conjugate phase retrieval.

    With more columns than the minimum, the matrix is certified as soon as
    one minimal column subset passes, since a sub-collection that does
    conjugate phase retrieval makes the whole collection do so.  Returns
    False when no subset passes.

    Raises
    ------
    UnsupportedDimensionError
        If ``V`` has complex entries or ``K`` is not 2 or 3.
    ValueError
        If ``V`` has too few columns for its dimension.
    """
    V = V if isinstance(V, CprMatrix) else CprMatrix(V)
    if not V.real_valued:
        raise UnsupportedDimensionError("no criterion for complex-valued measurement vectors")
    if V.K not in (2, 3):
        raise UnsupportedDimensionError(f"no criterion for dimension K={V.K}")
    need = 3 if V.K == 2 else 6
    if V.M < need:
        raise ValueError(f"K={V.K} needs at least {need} columns, got {V.M}")
    cols = V.columns.real.T
    for idx in combinations(range(V.M), need):
        sub = cols[list(idx)]
        if V.K == 2:
            m = _det2_matrix(*sub)
            det = det2_criterion(*sub)
        else:
            m = _det3_matrix(sub)
            det = float(np.linalg.det(m))
        if is_nonzero_det(det, m, rtol):
            return True
    return False


def cpr_distance(x, y):
    """Distance between the equivalence classes of ``x`` and ``y``.

    ``min(||x x^* - y y^*||_F, ||x x^* - conj(y) conj(y)^*||_F)``; zero
    exactly when ``x`` is a unimodular multiple of ``y`` or of ``conj(y)``.
    """
    x = as_vector(x)
    y = as_vector(y, x.size)
    return float(cpr_distance_batch(x[None, :], y[None, :])[0])


def cpr_distance_batch(x, y):
    """Row-wise :func:`cpr_distance` for ``(n, K)`` arrays."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    gx = x[:, :, None] * x[:, None, :].conj()
    gy = y[:, :, None] * y[:, None, :].conj()
    d1 = np.sqrt(np.sum(np.abs(gx - gy) ** 2, axis=(1, 2)))
    d2 = np.sqrt(np.sum(np.abs(gx - gy.conj()) ** 2, axis=(1, 2)))
    return np.minimum(d1, d2)


def _parse_entry(tok):
    t = tok.strip()
    if not t:
        raise ValueError("empty entry")
    if t.endswith(("j", "J")):
        return complex(t)
    return complex(float(t), 0.0)


def read_matrix(path):
    """Read a matrix file: a ``K M`` header, then K rows of M entries.

    Entries are ``re`` or ``re+imj`` (Python complex literal syntax).
    """
    with open(path) as fh:
        lines = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: header must be 'K M', got {lines[0]!r}")
    K, M = (int(h) for h in head)
    if K < 1 or M < 1:
        raise ValueError(f"{path}: K and M must be positive")
    if len(lines) - 1 != K:
        raise ValueError(f"{path}: expected {K} rows, found {len(lines) - 1}")
    rows = []
    for i, ln in enumerate(lines[1:], 1):
        toks = ln.split()
        if len(toks) != M:
            raise ValueError(f"{path}: row {i} has {len(toks)} entries, expected {M}")
        try:
            rows.append([_parse_entry(t) for t in toks])
        except ValueError as exc:
            raise ValueError(f"{path}: row {i}: {exc}") from None
    return CprMatrix(np.array(rows, dtype=complex))


def _fmt_entry(z):
    if z.imag == 0:
        return repr(float(z.real))
    return repr(complex(z)).strip("()")


def write_matrix(path, V):
    V = V if isinstance(V, CprMatrix) else CprMatrix(V)
    with open(path, "w") as fh:
        fh.write(f"{V.K} {V.M}\n")
        for row in V.columns:
            fh.write(" ".join(_fmt_entry(z) for z in row) + "\n")
