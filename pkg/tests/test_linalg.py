import numpy as np
import pytest

from kldwave.errors import DidNotConverge, NotPositiveDefinite, ShapeMismatch
from kldwave.linalg import (
    check_hermitian,
    cholesky_pd,
    hermitian_part,
    kron_apply,
    logdet_pd,
    power_iteration_max_eig,
    solve_pd,
)


def random_pd(rng, n, shift=None):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return hermitian_part(a @ a.conj().T + (shift if shift is not None else n) * np.eye(n))


class TestCholesky:
    def test_identity(self):
        np.testing.assert_allclose(cholesky_pd(np.eye(3)), np.eye(3))

    def test_diagonal_square_roots(self):
        np.testing.assert_allclose(cholesky_pd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_complex_reconstruction(self):
        m = np.array([[2.0, 1j], [-1j, 2.0]])
        low = cholesky_pd(m)
        np.testing.assert_allclose(low @ low.conj().T, m, atol=1e-12)
        assert np.allclose(np.triu(low, 1), 0)
        assert np.all(np.real(np.diag(low)) > 0)
        assert np.allclose(np.imag(np.diag(low)), 0)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_pd(np.diag([1.0, -1.0]))

    def test_relative_pivot_threshold(self):
        # LAPACK alone would accept this; the relative threshold must not.
        with pytest.raises(NotPositiveDefinite):
            cholesky_pd(np.diag([1.0, 1e-14]), rel_tol=1e-10)
        cholesky_pd(np.diag([1.0, 1e-14]), rel_tol=0.0)

    def test_residual_on_random_pd(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = random_pd(rng, 6)
            low = cholesky_pd(m)
            assert np.linalg.norm(low @ low.conj().T - m) <= 1e-10 * np.linalg.norm(m)


class TestSolvePd:
    def test_identity_solve(self):
        b = np.arange(6.0).reshape(3, 2) + 1j
        np.testing.assert_allclose(solve_pd(np.eye(3), b), b)

    def test_diagonal_solve(self):
        out = solve_pd(np.diag([2.0, 4.0]), np.array([[2.0], [4.0]]))
        np.testing.assert_allclose(out, np.array([[1.0], [1.0]]))

    def test_residual(self):
        rng = np.random.default_rng(1)
        m = random_pd(rng, 4)
        b = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        s = solve_pd(m, b)
        assert np.linalg.norm(m @ s - b) <= 1e-10 * np.linalg.norm(b)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            solve_pd(np.eye(3), np.ones((2, 2)))


class TestLogdet:
    def test_identity(self):
        assert logdet_pd(np.eye(5)) == pytest.approx(0.0, abs=1e-14)

    def test_diagonal(self):
        assert logdet_pd(np.diag([np.e, np.e])) == pytest.approx(2.0, rel=1e-12)

    def test_matches_eigenvalue_product(self):
        rng = np.random.default_rng(2)
        m = random_pd(rng, 3)
        oracle = float(np.sum(np.log(np.linalg.eigvalsh(m))))
        assert logdet_pd(m) == pytest.approx(oracle, rel=1e-10)

    def test_block_diagonal_additivity(self):
        rng = np.random.default_rng(3)
        a, b = random_pd(rng, 3), random_pd(rng, 4)
        block = np.zeros((7, 7), dtype=complex)
        block[:3, :3], block[3:, 3:] = a, b
        assert logdet_pd(a) + logdet_pd(b) == pytest.approx(logdet_pd(block), abs=1e-10)


class TestPowerIteration:
    def test_diagonal_spectrum(self):
        lam = power_iteration_max_eig(np.diag([1.0, 2.0, 3.0]), 200, 1e-12, seed=0)
        assert lam == pytest.approx(3.0, abs=1e-8)

    def test_identity_one_iteration(self):
        lam = power_iteration_max_eig(np.eye(4), 1, 1e-10, seed=5)
        assert lam == pytest.approx(1.0, abs=1e-12)

    def test_matches_dense_eigensolver(self):
        rng = np.random.default_rng(4)
        m = random_pd(rng, 8)
        top = np.linalg.eigvalsh(m)[-1]
        lam = power_iteration_max_eig(m, 500, 1e-12, seed=1)
        assert lam == pytest.approx(top, rel=1e-6)

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(5)
        m = random_pd(rng, 6)
        assert power_iteration_max_eig(m, 100, 1e-10, seed=9) == power_iteration_max_eig(
            m, 100, 1e-10, seed=9
        )

    def test_did_not_converge(self):
        with pytest.raises(DidNotConverge):
            power_iteration_max_eig(np.diag([1.0, 0.99]), 3, 1e-14, seed=0)

    def test_bounds(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            m = random_pd(rng, 5)
            lam = power_iteration_max_eig(m, 500, 1e-10, seed=2)
            assert lam <= np.real(np.trace(m)) + 1e-9
            assert lam >= np.max(np.real(np.diag(m))) - 1e-10 * lam


class TestKronApply:
    def test_identity_factors(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        np.testing.assert_allclose(kron_apply(np.eye(3), np.eye(2), x), x)

    def test_one_sided(self):
        rng = np.random.default_rng(8)
        r = random_pd(rng, 2)
        x = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        np.testing.assert_allclose(kron_apply(np.eye(3), r, x), x @ r)

    def test_matches_explicit_kron(self):
        rng = np.random.default_rng(9)
        a, r = random_pd(rng, 2), random_pd(rng, 2)
        x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        dense = (np.kron(r.T, a) @ x.flatten(order="F")).reshape((2, 2), order="F")
        np.testing.assert_allclose(kron_apply(a, r, x), dense, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(10)
        a, r = random_pd(rng, 3), random_pd(rng, 2)
        x = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        z = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        alpha, beta = 1.3 - 0.2j, -0.7 + 0.5j
        lhs = kron_apply(a, r, alpha * x + beta * z)
        rhs = alpha * kron_apply(a, r, x) + beta * kron_apply(a, r, z)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            kron_apply(np.eye(3), np.eye(2), np.ones((2, 3)))


class TestCheckHermitian:
    def test_symmetrizes_within_tolerance(self):
        m = np.array([[1.0, 0.5 + 1e-13j], [0.5, 2.0]])
        out = check_hermitian(m)
        np.testing.assert_allclose(out, out.conj().T)
        assert np.allclose(np.imag(np.diag(out)), 0)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            check_hermitian(np.array([[1.0, 1.0], [0.0, 1.0]]))
