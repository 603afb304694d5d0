import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optcz.errors import DimensionError, ShapeError, SymmetryError, UnsupportedMultiplicityError
from optcz.numkernel import (
    eigh,
    permanent,
    permanent_naive,
    permanent_ryser,
    permanent_sub,
    project_psd,
    svd2,
)
from tests.conftest import random_complex, random_unitary


def brute_permanent(m):
    n = len(m)
    return sum(math.prod(m[i][p[i]] for i in range(n)) for p in permutations(range(n)))


class TestPermanent:
    def test_two_by_two(self):
        a, b, c, d = 1 + 2j, -0.5j, 3.0, 0.25 - 1j
        assert permanent([[a, b], [c, d]]) == pytest.approx(a * d + b * c)

    @pytest.mark.parametrize("n", [1, 3, 5, 8])
    def test_identity(self, n):
        assert permanent(np.eye(n)) == pytest.approx(1.0)

    def test_all_ones(self):
        assert permanent(np.ones((3, 3))) == pytest.approx(6.0)
        assert permanent(np.ones((6, 6))) == pytest.approx(720.0)

    def test_empty(self):
        assert permanent(np.zeros((0, 0))) == 1

    @pytest.mark.parametrize("n", range(0, 7))
    def test_against_brute_force(self, rng, n):
        m = random_complex(rng, n, n)
        expected = brute_permanent(m.tolist()) if n else 1
        assert abs(permanent(m) - expected) < 1e-10
        assert abs(permanent_ryser(m) - permanent_naive(m)) < 1e-10

    def test_large_ryser_all_ones(self):
        assert permanent(np.ones((10, 10))) == pytest.approx(math.factorial(10))

    def test_non_square(self):
        with pytest.raises(DimensionError):
            permanent(np.ones((2, 3)))

    def test_too_large(self):
        with pytest.raises(DimensionError):
            permanent(np.ones((17, 17)))

    def test_row_and_column_permutation_invariance(self, rng):
        m = random_complex(rng, 5, 5)
        P = np.eye(5)[rng.permutation(5)]
        ref = permanent(m)
        assert abs(permanent(P @ m) - ref) < 1e-10
        assert abs(permanent(m @ P) - ref) < 1e-10

    def test_row_multilinearity(self, rng):
        m = random_complex(rng, 4, 4)
        u, v = random_complex(rng, 4), random_complex(rng, 4)
        alpha, beta = 0.3 - 1.2j, 2.0 + 0.5j
        mu, mv, mix = m.copy(), m.copy(), m.copy()
        mu[1], mv[1], mix[1] = u, v, alpha * u + beta * v
        assert abs(permanent(mix) - (alpha * permanent(mu) + beta * permanent(mv))) < 1e-10

    def test_direct_sum(self, rng):
        a, b = random_complex(rng, 2, 2), random_complex(rng, 3, 3)
        m = np.zeros((5, 5), dtype=complex)
        m[:2, :2], m[2:, 2:] = a, b
        assert abs(permanent(m) - permanent(a) * permanent(b)) < 1e-10


class TestPermanentSub:
    def test_identity_selected(self):
        assert permanent_sub(np.eye(4), (1, 0, 1, 0), (1, 0, 1, 0)) == pytest.approx(1)

    def test_identity_off_diagonal(self):
        assert permanent_sub(np.eye(4), (1, 0, 1, 0), (0, 1, 1, 0)) == pytest.approx(0)

    def test_two_mode_expansion(self, rng):
        m = random_complex(rng, 4, 4)
        expected = m[0, 0] * m[1, 1] + m[0, 1] * m[1, 0]
        assert permanent_sub(m, (1, 1, 0, 0), (1, 1, 0, 0)) == pytest.approx(expected)

    def test_mismatched_totals(self):
        with pytest.raises(ShapeError):
            permanent_sub(np.eye(4), (1, 1, 0, 0), (1, 0, 0, 0))

    def test_multiplicity_rejected(self):
        with pytest.raises(UnsupportedMultiplicityError):
            permanent_sub(np.eye(4), (2, 0, 0, 0), (1, 1, 0, 0))

    def test_wrong_length(self):
        with pytest.raises(ShapeError):
            permanent_sub(np.eye(4), (1, 0, 0), (1, 0, 0))


class TestSvd2:
    def test_diagonal(self):
        u, s, vh = svd2(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(s, [2, 1])
        np.testing.assert_allclose(np.abs(u), np.eye(2), atol=1e-15)

    def test_scaled_unitary_block(self):
        g = 3 ** -0.5
        _, s, _ = svd2(g * np.array([[1, 1j * np.sqrt(2)], [1j * np.sqrt(2), 1]]))
        np.testing.assert_allclose(s, [1, 1], atol=1e-12)

    def test_zero(self):
        _, s, _ = svd2(np.zeros((2, 2)))
        np.testing.assert_array_equal(s, [0, 0])

    def test_shape(self):
        with pytest.raises(ShapeError):
            svd2(np.eye(3))

    def test_reconstruction_many(self, rng):
        worst = 0.0
        for _ in range(1000):
            m = random_complex(rng, 2, 2)
            u, s, vh = svd2(m)
            worst = max(worst, np.max(np.abs(u @ np.diag(s) @ vh - m)))
            assert s[0] >= s[1] >= 0
        assert worst < 1e-12


class TestEigh:
    def test_diagonal(self):
        w, _ = eigh(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(w, [1, 2, 3])

    def test_rank_one_projector(self, rng):
        v = random_complex(rng, 5)
        v /= np.linalg.norm(v)
        w, _ = eigh(np.outer(v, v.conj()))
        np.testing.assert_allclose(w, [0, 0, 0, 0, 1], atol=1e-12)

    def test_trace_identity(self, rng):
        h = random_complex(rng, 16, 16)
        h = h + h.conj().T
        w, _ = eigh(h)
        assert abs(w.sum() - np.trace(h).real) < 1e-10

    def test_not_hermitian(self):
        with pytest.raises(SymmetryError):
            eigh(np.array([[1, 1], [0, 1]]))

    def test_reconstruction_many(self, rng):
        worst = 0.0
        for _ in range(1000):
            n = rng.integers(1, 17)
            h = random_complex(rng, n, n)
            h = h + h.conj().T
            w, v = eigh(h)
            worst = max(worst, np.max(np.abs((v * w) @ v.conj().T - h)))
            assert np.max(np.abs(v.conj().T @ v - np.eye(n))) < 1e-10
        assert worst < 1e-10


class TestProjectPsd:
    def test_psd_unchanged(self, rng):
        a = random_complex(rng, 4, 4)
        psd = a @ a.conj().T
        np.testing.assert_allclose(project_psd(psd), psd, atol=1e-12)

    def test_clips_negative(self):
        np.testing.assert_allclose(project_psd(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]))

    def test_non_hermitian(self):
        with pytest.raises(SymmetryError):
            project_psd(np.array([[0, 1], [0, 0]]))

    def test_nearest_psd_optimality_conditions(self, rng):
        # p is the Frobenius projection of h onto the PSD cone iff p >= 0,
        # p - h >= 0 and Tr[p (p - h)] = 0.
        h = random_complex(rng, 6, 6)
        h = h + h.conj().T
        p = project_psd(h)
        gap = p - h
        assert np.linalg.eigvalsh(p).min() > -1e-12
        assert np.linalg.eigvalsh(gap).min() > -1e-10
        assert abs(np.trace(p @ gap)) < 1e-10

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_idempotent(self, n, seed):
        rng = np.random.default_rng(seed)
        h = random_complex(rng, n, n)
        h = h + h.conj().T
        p = project_psd(h)
        np.testing.assert_allclose(project_psd(p), p, atol=1e-10)


def test_random_unitary_helper_is_unitary(rng):
    u = random_unitary(rng, 4)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)
