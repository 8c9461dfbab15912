import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predrisk.exceptions import NotPositiveDefinite, SingularGram
from predrisk.linalg import cholesky_upper, gram_logdet, logdet_from_upper

from oracles import explicit_gram_logdet


class TestCholeskyUpper:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky_upper(np.eye(2)), np.eye(2))

    def test_diagonal(self):
        np.testing.assert_allclose(cholesky_upper(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_seeded_spd_reconstructs(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(3, 3))
        a = m @ m.T + np.eye(3)
        u = cholesky_upper(a)
        assert np.all(np.tril(u, -1) == 0.0)
        assert np.all(np.diag(u) > 0.0)
        err = np.linalg.norm(u @ u.T - a) / np.linalg.norm(a)
        assert err <= 1e-10

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_upper(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            cholesky_upper(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_jitter_is_opt_in(self):
        # rank-deficient matrix passes only when the caller asks for jitter
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(NotPositiveDefinite):
            cholesky_upper(a)
        u = cholesky_upper(a, jitter=1e-8)
        assert np.all(np.diag(u) > 0.0)

    def test_logdet_from_upper(self):
        u = cholesky_upper(np.diag([4.0, 9.0]))
        assert logdet_from_upper(u) == pytest.approx(np.log(36.0), rel=1e-14)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_reconstruction_property(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 6))
        m = rng.normal(size=(d, d))
        a = m @ m.T + (0.1 + rng.uniform()) * np.eye(d)
        u = cholesky_upper(a)
        err = np.linalg.norm(u @ u.T - a) / np.linalg.norm(a)
        assert err <= 1e-10


class TestGramLogdet:
    def test_orthonormal(self):
        vectors = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]
        assert gram_logdet(vectors) == pytest.approx(0.0, abs=1e-14)

    def test_diagonal_gram(self):
        assert gram_logdet([[2.0, 0.0], [0.0, 3.0]]) == pytest.approx(np.log(36.0), rel=1e-14)

    def test_matches_explicit_determinant(self):
        rng = np.random.default_rng(17)
        vectors = rng.normal(size=(3, 5))
        assert gram_logdet(vectors) == pytest.approx(explicit_gram_logdet(vectors), abs=1e-10)

    def test_linear_dependence_raises(self):
        v = np.array([1.0, 2.0, 3.0])
        with pytest.raises(SingularGram):
            gram_logdet([v, 2.0 * v])

    def test_zero_vector_raises(self):
        with pytest.raises(SingularGram):
            gram_logdet([[0.0, 0.0], [1.0, 0.0]])

    def test_extreme_scale_stays_finite(self):
        rng = np.random.default_rng(8)
        vectors = rng.normal(size=(3, 6)) * 1e180
        value = gram_logdet(vectors)
        assert np.isfinite(value)
        # each of the 3 vectors contributes twice its log scale
        rescaled = gram_logdet(np.asarray(vectors) / 1e180)
        assert value == pytest.approx(rescaled + 6 * np.log(1e180), rel=1e-12)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 5))
        vectors = rng.normal(size=(k, k + 3))
        perm = rng.permutation(k)
        base = gram_logdet(vectors)
        assert gram_logdet(vectors[perm]) == pytest.approx(base, rel=1e-10, abs=1e-10)
