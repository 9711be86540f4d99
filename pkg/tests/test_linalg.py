import math

import numpy as np
import pytest

from tuckerkit.linalg import (
    orth_complement,
    random_orthonormal,
    schatten_norm,
    sin_theta,
    svd_r,
    truncated_schatten,
)


class TestSvdR:
    def test_diagonal(self):
        U, s, Vt = svd_r(np.diag([3.0, 2.0, 1.0]), 2)
        np.testing.assert_allclose(s, [3.0, 2.0])
        np.testing.assert_allclose(np.abs(U), np.eye(3)[:, :2], atol=1e-14)
        # sign convention: largest-magnitude entry nonnegative
        assert U[0, 0] > 0 and U[1, 1] > 0

    def test_identity_degenerate(self):
        U, _, _ = svd_r(np.eye(4), 3)
        np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-12)

    def test_eckart_young_residual(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((8, 5))
        full = np.linalg.svd(M, compute_uv=False)
        for r in (1, 3, 5):
            U, s, Vt = svd_r(M, r)
            resid = np.linalg.norm(M - (U * s) @ Vt) ** 2
            np.testing.assert_allclose(resid, np.sum(full[r:] ** 2), atol=1e-10)

    def test_rank_completion(self):
        # rank-1 input still yields r orthonormal columns
        u = np.ones((6, 1)) / math.sqrt(6)
        M = u @ np.ones((1, 4))
        U, s, _ = svd_r(M, 3)
        np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-10)
        assert s[1] <= 1e-12

    def test_determinism(self):
        M = np.random.default_rng(1).standard_normal((7, 7))
        a = svd_r(M, 4)
        b = svd_r(M.copy(), 4)
        assert np.array_equal(a.U, b.U) and np.array_equal(a.Vt, b.Vt)

    def test_errors(self):
        with pytest.raises(ValueError):
            svd_r(np.zeros((3, 3)), 4)
        with pytest.raises(ValueError):
            svd_r(np.array([[np.nan, 0.0], [0.0, 1.0]]), 1)


class TestTruncatedSchatten:
    def test_diag_examples(self):
        M = np.diag([3.0, 2.0, 1.0])
        np.testing.assert_allclose(truncated_schatten(M, 2, 2), math.sqrt(13))
        np.testing.assert_allclose(truncated_schatten(M, 1, math.inf), 3.0)

    def test_spectral_equals_rank_one_inf(self):
        M = np.random.default_rng(2).standard_normal((5, 6))
        assert truncated_schatten(M, 1, math.inf) == pytest.approx(np.linalg.norm(M, 2))

    def test_zero_matrix(self):
        assert truncated_schatten(np.zeros((4, 4)), 3, 2) == 0.0

    def test_monotone_in_rank(self):
        M = np.random.default_rng(3).standard_normal((6, 6))
        vals = [truncated_schatten(M, r, 3.0) for r in range(1, 7)]
        assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_bad_order(self):
        with pytest.raises(ValueError):
            truncated_schatten(np.eye(2), 1, 0.5)


class TestSinTheta:
    def test_equal_bases(self):
        U = random_orthonormal(6, 2, np.random.default_rng(4))
        assert sin_theta(U, U) <= 1e-12

    def test_orthogonal_subspaces(self):
        e1 = np.eye(3)[:, :1]
        e2 = np.eye(3)[:, 1:2]
        assert sin_theta(e1, e2) == pytest.approx(1.0)

    def test_half_blend(self):
        e1 = np.eye(3)[:, :1]
        blend = np.array([[1.0], [1.0], [0.0]]) / math.sqrt(2)
        assert sin_theta(e1, blend) == pytest.approx(math.sqrt(2) / 2)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(5)
        U = random_orthonormal(8, 3, rng)
        Q = random_orthonormal(3, 3, rng)
        assert sin_theta(U, U @ Q) <= 1e-10

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        U, V = random_orthonormal(7, 3, rng), random_orthonormal(7, 3, rng)
        for q in (1.0, 2.0, math.inf):
            assert sin_theta(U, V, q) == pytest.approx(sin_theta(V, U, q), abs=1e-10)

    def test_complement_identity(self):
        # complement-route value agrees with the cosine route sqrt(1 - s^2)
        rng = np.random.default_rng(7)
        U, V = random_orthonormal(9, 3, rng), random_orthonormal(9, 3, rng)
        cosines = np.clip(np.linalg.svd(U.T @ V, compute_uv=False), 0.0, 1.0)
        sines = np.sqrt(1.0 - cosines**2)
        assert sin_theta(U, V, math.inf) == pytest.approx(float(sines.max()), abs=1e-9)
        assert sin_theta(U, V, 2.0) == pytest.approx(
            float(np.sqrt(np.sum(sines**2))), abs=1e-9
        )
        cross = truncated_schatten(orth_complement(U).T @ V, 3, math.inf)
        assert sin_theta(U, V, math.inf) == pytest.approx(cross, abs=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sin_theta(np.eye(3)[:, :1], np.eye(4)[:, :1])


class TestOrthComplement:
    def test_unit_vector(self):
        comp = orth_complement(np.array([[1.0], [0.0]]))
        assert comp.shape == (2, 1)
        assert abs(abs(comp[1, 0]) - 1.0) <= 1e-12

    def test_completes_to_square_orthogonal(self):
        U = random_orthonormal(8, 3, np.random.default_rng(8))
        full = np.hstack([U, orth_complement(U)])
        np.testing.assert_allclose(full.T @ full, np.eye(8), atol=1e-10)

    def test_identity_columns(self):
        U = np.eye(5)[:, :2]
        comp = orth_complement(U)
        assert np.max(np.abs(U.T @ comp)) <= 1e-12
        assert np.max(np.abs(comp[:2])) <= 1e-12

    def test_square_errors(self):
        with pytest.raises(ValueError):
            orth_complement(np.eye(3))


class TestRandomOrthonormal:
    def test_square_is_orthogonal(self):
        Q = random_orthonormal(5, 5, np.random.default_rng(9))
        np.testing.assert_allclose(Q.T @ Q, np.eye(5), atol=1e-12)
        assert abs(abs(np.linalg.det(Q)) - 1.0) <= 1e-12

    def test_haar_first_moment(self):
        rng = np.random.default_rng(10)
        p, r = 6, 2
        acc = np.zeros((p, p))
        n = 1000
        for _ in range(n):
            U = random_orthonormal(p, r, rng)
            acc += U @ U.T
        np.testing.assert_allclose(acc / n, (r / p) * np.eye(p), atol=0.05)

    def test_seed_determinism(self):
        a = random_orthonormal(7, 3, np.random.default_rng(11))
        b = random_orthonormal(7, 3, np.random.default_rng(11))
        assert np.array_equal(a, b)

    def test_rank_too_large(self):
        with pytest.raises(ValueError):
            random_orthonormal(3, 4)


def test_schatten_norm_special_cases():
    M = np.random.default_rng(12).standard_normal((4, 6))
    assert schatten_norm(M, 2) == pytest.approx(np.linalg.norm(M))
    assert schatten_norm(M, math.inf) == pytest.approx(np.linalg.norm(M, 2))
