import numpy as np
import pytest

from multibang import numerics


class TestSolveDense:
    def test_square_system(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(5, 5))
        x = rng.normal(size=5)
        assert np.allclose(numerics.solve_dense(A, A @ x), x, atol=1e-10)

    def test_minimum_norm_for_rank_deficient(self):
        A = np.array([[1.0, 0.0], [0.0, 0.0]])
        x = numerics.solve_dense(A, np.array([2.0, 0.0]))
        assert np.allclose(x, [2.0, 0.0])


class TestGmres:
    def test_matches_direct_solve(self):
        rng = np.random.default_rng(1)
        A = np.eye(30) + 0.1 * rng.normal(size=(30, 30))
        b = rng.normal(size=30)
        x, iters, converged = numerics.gmres(A, b, tol_rel=1e-12)
        assert converged
        assert np.allclose(A @ x, b, atol=1e-9)

    def test_zero_rhs(self):
        x, iters, converged = numerics.gmres(np.eye(4), np.zeros(4))
        assert converged and iters == 0
        assert np.all(x == 0)

    def test_exact_in_n_steps(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(12, 12)) + 5 * np.eye(12)
        b = rng.normal(size=12)
        x, iters, converged = numerics.gmres(A, b, tol_rel=1e-13, max_iter=12)
        assert converged and iters <= 12

    def test_operator_interface(self):
        D = np.diag(np.arange(1.0, 9.0))
        op = numerics.LinearOperator((8, 8), lambda v: D @ v)
        b = np.ones(8)
        x, _, converged = numerics.gmres(op, b, tol_rel=1e-13)
        assert converged
        assert np.allclose(x, 1.0 / np.arange(1.0, 9.0), atol=1e-10)


class TestLp:
    def test_simple_lp(self):
        # min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0
        value, x = numerics.solve_lp(
            np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), np.array([1.0])
        )
        assert value == pytest.approx(1.0)
        assert np.allclose(x, [1.0, 0.0])

    def test_infeasible(self):
        with pytest.raises(numerics.LPInfeasible):
            numerics.solve_lp(
                np.array([1.0]), np.array([[1.0], [1.0]]), np.array([1.0, 2.0])
            )


class TestProxOracle:
    def test_single_point_set(self):
        oracle = numerics.ProxOracle(np.array([[1.0, 0.0]]), np.array([0.5]))
        q = np.array([3.0, 1.0])
        w, idx = oracle.prox(q, 0.5)
        # prox of an affine function is a shift
        assert np.allclose(w, q - 0.5 * np.array([1.0, 0.0]))

    def test_matches_quadratic_program(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(4, 2))
        offs = 0.5 * np.sum(pts**2, axis=1)
        oracle = numerics.ProxOracle(pts, offs)
        for _ in range(20):
            q = rng.normal(scale=2.0, size=2)
            w, _ = oracle.prox(q, 0.3)
            w2 = numerics.prox_oracle_qp(list(zip(pts, offs)), q, 0.3)
            assert np.linalg.norm(w - w2) < 1e-8
