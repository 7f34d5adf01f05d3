import numpy as np
import pytest

from multibang import numerics
from multibang.penalty import CostSpec, PenaltyEngine, RadialPenalty
from multibang.penalty.core import AdmissibleSet


def make_radial(n=4, omega0=1.0, alpha=1.0):
    thetas = 2 * np.pi * np.arange(n) / n
    return RadialPenalty(thetas, omega0=omega0, alpha=alpha)


def matching_engine(pen):
    return PenaltyEngine(
        AdmissibleSet(pen.points), CostSpec("quadratic", alpha=pen.alpha)
    )


class TestRadialBasics:
    def test_points(self):
        pen = make_radial(4, omega0=2.0)
        # origin plus the four circle points
        assert pen.points.shape == (5, 2)
        norms = np.sort(np.linalg.norm(pen.points, axis=1))
        assert norms[0] == 0.0 and np.allclose(norms[1:], 2.0)

    def test_conjugate(self):
        pen = make_radial(4, omega0=1.0, alpha=0.5)
        # q aligned with the first point: rho |q| - alpha omega0^2 / 2
        q = np.array([2.0, 0.0])
        assert pen.conjugate_value(q) == pytest.approx(2.0 - 0.25)
        assert pen.conjugate_value(np.array([0.1, 0.0])) == 0.0

    def test_penalty_at_origin_and_vertex(self):
        pen = make_radial(4, omega0=1.5, alpha=2.0)
        assert pen.penalty_value(np.array([0.0, 0.0])) == pytest.approx(0.0)
        assert pen.penalty_value(pen.points[1]) == pytest.approx(2.0 * 1.125)


class TestRadialClosedForms:
    def test_prox_matches_oracle(self):
        pen = make_radial(5, omega0=1.3, alpha=0.6)
        pts = pen.points
        cost = 0.6 * 0.5 * np.sum(pts**2, axis=1)
        oracle = numerics.ProxOracle(pts, cost)
        rng = np.random.default_rng(7)
        for gamma in (0.5, 1e-2, 1e-4):
            Q = rng.normal(scale=2.5, size=(200, 2))
            W = pen.prox(Q, gamma)
            for k in range(len(Q)):
                w_ref, _ = oracle.prox(Q[k], gamma)
                assert np.linalg.norm(W[k] - w_ref) < 1e-8

    def test_matches_general_engine(self):
        pen = make_radial(4, omega0=1.0, alpha=1.0)
        eng = matching_engine(pen)
        rng = np.random.default_rng(8)
        Q = rng.normal(scale=2.0, size=(300, 2))
        for gamma in (0.3, 1e-3):
            H = pen.yosida(Q, gamma)
            He = eng.yosida(Q, gamma)
            assert np.abs(H - He).max() < 1e-10
            D = pen.newton_deriv(Q, gamma)
            De = eng.newton_deriv(Q, gamma)
            assert np.abs(D - De).max() < 1e-10

    def test_newton_deriv_fd(self):
        pen = make_radial(6, omega0=1.1, alpha=0.8)
        rng = np.random.default_rng(9)
        hits = 0
        for _ in range(80):
            q = rng.normal(scale=2.0, size=2)
            D = pen.newton_deriv(q[None, :], 0.2)[0]
            eps = 1e-7
            Dfd = np.zeros((2, 2))
            for c in range(2):
                e = np.zeros(2)
                e[c] = eps
                Dfd[:, c] = (
                    pen.yosida((q + e)[None, :], 0.2)[0]
                    - pen.yosida((q - e)[None, :], 0.2)[0]
                ) / (2 * eps)
            if np.abs(D - Dfd).max() < 1e-6:
                hits += 1
        assert hits >= 70

    def test_region_codes_cover_plane(self):
        pen = make_radial(4)
        g = np.linspace(-3, 3, 201)
        X, Y = np.meshgrid(g, g)
        Q = np.column_stack([X.ravel(), Y.ravel()])
        code, i, part = pen.classify(Q, 0.5)
        assert set(np.unique(code)) <= {0, 1, 2, 3, 4}
        # all five regions appear at this gamma
        assert len(np.unique(code)) == 5

    def test_resolvent_identity(self):
        pen = make_radial(4, alpha=0.5)
        rng = np.random.default_rng(10)
        Q = rng.normal(scale=2.0, size=(100, 2))
        W = pen.prox(Q, 0.05)
        H = pen.yosida(Q, 0.05)
        assert np.abs(W + 0.05 * H - Q).max() < 1e-12

    def test_region_grid_csv(self):
        pen = make_radial(4)
        csv = pen.region_grid_csv(-2.0, 2.0, 4, 0.1)
        lines = csv.strip().split("\n")
        assert lines[0] == "q1,q2,code,i,j"
        assert len(lines) == 17
