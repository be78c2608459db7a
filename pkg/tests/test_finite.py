from itertools import combinations

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cprpw.finite import (
    CprMatrix,
    UnsupportedDimensionError,
    certify_cpr,
    cpr_distance,
    det2_criterion,
    det3_criterion,
    example_matrix,
    gram,
    magnitude_measurements,
    read_matrix,
    write_matrix,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
cvec = st.lists(st.tuples(finite, finite), min_size=3, max_size=3).map(
    lambda p: np.array([complex(a, b) for a, b in p])
)


def sympy_det3(cols):
    """Exact rational determinant of the quadratic-form matrix."""
    rows = [[x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z] for x, y, z in cols]
    return sp.Matrix(rows).det()


def sympy_rank3(cols):
    rows = [[x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z] for x, y, z in cols]
    return sp.Matrix(rows).rank()


class TestMagnitudes:
    def test_identity(self):
        out = magnitude_measurements(np.eye(3), [3, 4j, 0])
        np.testing.assert_allclose(out, [3, 4, 0])

    def test_example_matrix_on_e1(self, V):
        # inner products of e1 with the six columns: 1, 0, 0, 1, 1, 0
        np.testing.assert_allclose(magnitude_measurements(V, [1, 0, 0]), [1, 0, 0, 1, 1, 0])

    def test_zero(self, V):
        assert not magnitude_measurements(V, np.zeros(3)).any()

    def test_dimension_mismatch(self, V):
        with pytest.raises(ValueError, match="dimension"):
            magnitude_measurements(V, [1, 2])

    def test_complex_matrix_uses_conjugate(self):
        V = CprMatrix([[1j], [1]])
        # <x, v> = sum x_k conj(v_k) = 1 * (-i) + 1 * 1
        assert magnitude_measurements(V, [1, 1])[0] == pytest.approx(abs(1 - 1j))

    @given(cvec, st.floats(0, 2 * np.pi))
    def test_phase_invariance(self, x, theta):
        V = example_matrix()
        a = magnitude_measurements(V, x)
        b = magnitude_measurements(V, np.exp(1j * theta) * x)
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12 * (1 + np.abs(x).max()))

    @given(cvec)
    def test_conjugation_invariance_for_real_matrix(self, x):
        V = example_matrix()
        np.testing.assert_allclose(
            magnitude_measurements(V, x.conj()), magnitude_measurements(V, x), rtol=1e-12, atol=1e-12
        )


class TestDeterminants:
    def test_det2_colinear(self):
        assert det2_criterion((1, 0), (2, 0), (3, 0)) == 0

    @pytest.mark.parametrize(
        "c, expected",
        # rows (1,0,0), (0,0,1), (c1^2, 2c1c2, c2^2): cofactor expansion gives -2 c1 c2
        [((1, 1), -2.0), ((1, -1), 2.0)],
    )
    def test_det2_values(self, c, expected):
        assert det2_criterion((1, 0), (0, 1), c) == expected

    def test_det3_example_matrix_matches_exact(self, V):
        cols = [tuple(int(v) for v in c) for c in V.columns.real.T]
        exact = sympy_det3(cols)
        assert exact == -8
        assert det3_criterion(V.columns.real.T) == pytest.approx(float(exact), rel=1e-12)

    def test_det3_repeated_vector(self):
        vecs = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 0), (0, 1, 1)]
        assert det3_criterion(*vecs) == 0

    def test_det3_accepts_separate_vectors(self, V):
        assert det3_criterion(*V.columns.real.T) == det3_criterion(V.columns.real.T)

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            det2_criterion((1, 0, 0), (0, 1, 0), (0, 0, 1))
        with pytest.raises(ValueError):
            det3_criterion([(1, 0, 0)] * 5)

    @given(
        st.lists(st.tuples(finite, finite), min_size=3, max_size=3),
        st.floats(0.1, 5),
    )
    def test_det2_scaling_one_vector(self, vecs, t):
        base = det2_criterion(*vecs)
        scaled = [vecs[0], (t * vecs[1][0], t * vecs[1][1]), vecs[2]]
        # round-off is relative to the size of the entries, not of the determinant
        scale = np.prod([np.dot(v, v) for v in vecs]) * t**2 + 1
        assert det2_criterion(*scaled) == pytest.approx(t**2 * base, rel=1e-9, abs=1e-12 * scale)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(finite, finite, finite), min_size=6, max_size=6), st.floats(0.1, 3))
    def test_det3_scaling_one_vector(self, vecs, t):
        base = det3_criterion(*vecs)
        scaled = list(vecs)
        scaled[2] = tuple(t * v for v in vecs[2])
        scale = np.prod([np.dot(v, v) for v in vecs]) * t**2 + 1
        assert det3_criterion(*scaled) == pytest.approx(t**2 * base, abs=1e-9 * scale)


class TestCertify:
    def test_example_matrix(self, V):
        assert certify_cpr(V)

    def test_colinear_2x3(self):
        assert not certify_cpr(CprMatrix([[1, 2, 3], [0, 0, 0]]))

    def test_2x3_good(self):
        assert certify_cpr(CprMatrix([[1, 0, 1], [0, 1, 1]]))

    def test_repeated_columns_no_good_subset(self):
        e = np.eye(3)
        cols = [e[0], e[1], e[2], e[0] + e[1], e[0], e[1], e[2]]
        # enumeration oracle: every 6-subset has quadratic-form rank < 6
        ranks = [sympy_rank3([tuple(int(v) for v in cols[i]) for i in idx]) for idx in combinations(range(7), 6)]
        assert max(ranks) < 6
        assert not certify_cpr(CprMatrix(np.array(cols).T))

    def test_superset_of_good_matrix(self, V):
        extra = np.column_stack([V.columns.real, [1, 1, 1]])
        assert certify_cpr(CprMatrix(extra))

    def test_complex_rejected(self):
        with pytest.raises(UnsupportedDimensionError):
            certify_cpr(CprMatrix([[1j, 0, 1], [0, 1, 1]]))

    def test_k4_rejected(self):
        with pytest.raises(UnsupportedDimensionError):
            certify_cpr(CprMatrix(np.ones((4, 12))))

    def test_too_few_columns(self):
        with pytest.raises(ValueError):
            certify_cpr(CprMatrix(np.eye(3)))

    def test_smoke_consistency(self, V, gen):
        assert certify_cpr(V)
        for _ in range(1000):
            x = gen.standard_normal(3) + 1j * gen.standard_normal(3)
            th = gen.uniform(0, 2 * np.pi)
            y = np.exp(1j * th) * (x.conj() if gen.random() < 0.5 else x)
            np.testing.assert_allclose(magnitude_measurements(V, y), magnitude_measurements(V, x), atol=1e-12)
            assert cpr_distance(x, y) < 1e-10


class TestDistance:
    def test_orthogonal_basis_vectors(self):
        # e1 e1^* - e2 e2^* has two unit entries
        assert cpr_distance([1, 0, 0], [0, 1, 0]) == pytest.approx(np.sqrt(2))

    @given(cvec, st.floats(0, 2 * np.pi))
    def test_zero_on_class(self, x, theta):
        tol = 1e-12 * (1 + np.abs(x).max() ** 2)
        assert cpr_distance(x, np.exp(1j * theta) * x) <= tol
        assert cpr_distance(x, np.exp(1j * theta) * x.conj()) <= tol

    @given(cvec, cvec)
    def test_symmetric_nonnegative(self, x, y):
        d = cpr_distance(x, y)
        assert d >= 0
        assert cpr_distance(y, x) == pytest.approx(d, rel=1e-12, abs=1e-12)

    def test_matches_explicit_frobenius(self, gen):
        x, y = gen.standard_normal(3) + 1j * gen.standard_normal(3), gen.standard_normal(3) + 0.5j
        d1 = np.sqrt(np.sum(np.abs(gram(x) - gram(y)) ** 2))
        d2 = np.sqrt(np.sum(np.abs(gram(x) - gram(y.conj())) ** 2))
        assert cpr_distance(x, y) == pytest.approx(min(d1, d2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cpr_distance([1, 2], [1, 2, 3])

    def test_gram_is_rank_one_psd(self, gen):
        g = gram(gen.standard_normal(3) + 1j * gen.standard_normal(3))
        np.testing.assert_allclose(g, g.conj().T)
        w = np.linalg.eigvalsh(g)
        assert w.min() > -1e-12
        assert np.sum(w > 1e-10 * w.max()) == 1


class TestMatrixFile:
    def test_roundtrip(self, tmp_path, V):
        p = tmp_path / "v.txt"
        write_matrix(p, V)
        assert np.array_equal(read_matrix(p).columns, V.columns)

    def test_complex_entries(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("2 2\n1+2j -0.5\n0 3-1j\n")
        V = read_matrix(p)
        assert V.columns[0, 0] == 1 + 2j and V.columns[1, 1] == 3 - 1j
        assert not V.real_valued
        write_matrix(tmp_path / "d.txt", V)
        assert np.array_equal(read_matrix(tmp_path / "d.txt").columns, V.columns)

    @pytest.mark.parametrize(
        "text",
        ["", "3\n1 2 3\n", "2 2\n1 2\n", "2 2\n1 2\n3\n", "1 2\n1 x\n"],
    )
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "bad.txt"
        p.write_text(text)
        with pytest.raises(ValueError):
            read_matrix(p)
