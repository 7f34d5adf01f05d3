import numpy as np
import pytest

from multibang.models import elasticity as el
from multibang.penalty import ConcentricPenalty


@pytest.fixture(scope="module")
def small():
    prob = el.ElasticityProblem(resolution=9, alpha=1e-3)
    disc = el.assemble(prob)
    return prob, disc


class TestAssembly:
    def test_mesh_counts(self, small):
        prob, disc = small
        res = prob.resolution
        assert disc.n_nodes == res * res
        assert len(disc.triangles) == 2 * (res - 1) ** 2

    def test_mass_total(self, small):
        # integrating 1 over the 1 x 2 rectangle in each component
        _, disc = small
        ones = np.ones(disc.n_dofs)
        assert ones @ (disc.M @ ones) == pytest.approx(4.0, abs=1e-12)

    def test_stiffness_kernel_contains_translations(self, small):
        _, disc = small
        for c in (0, 1):
            t = np.zeros(disc.n_dofs)
            t[c::2] = 1.0
            assert np.abs(disc.A @ t).max() < 1e-12

    def test_matrices_symmetric(self, small):
        _, disc = small
        for mat in (disc.M, disc.L, disc.K, disc.A):
            assert abs(mat - mat.T).max() < 1e-12

    def test_elasticity_is_combination(self, small):
        prob, disc = small
        diff = disc.A - (2 * prob.mu * disc.L + prob.lam * disc.K)
        assert abs(diff).max() < 1e-12

    def test_dirichlet_bottom_row(self, small):
        prob, disc = small
        bottom = np.arange(prob.resolution)
        expected = np.sort(np.concatenate([2 * bottom, 2 * bottom + 1]))
        assert np.array_equal(np.sort(disc.dirichlet), expected)


class TestTargets:
    def test_rotation_target_values(self, small):
        prob, disc = small
        z = el.make_rotation_target(prob, disc, angle=np.pi / 2)
        # x + z(x) = R(x - c): distances to the origin equal |x - c|
        k = np.argmin(np.abs(disc.nodes - [0.5, 1.0]).sum(axis=1))
        assert np.allclose(z[k], [-0.5, -1.0], atol=1e-12)
        r = np.linalg.norm(disc.nodes + z, axis=1)
        assert np.allclose(r, np.linalg.norm(disc.nodes - [0.5, 1.0], axis=1))

    def test_deadload_target_solves_elasticity(self, small):
        prob, disc = small
        z = el.make_deadload_target(prob, disc, magnitude=1.0)
        # displacement vanishes on the clamped bottom edge
        assert np.abs(z.ravel()[disc.dirichlet]).max() < 1e-12


class TestSolver:
    def test_ssn_converges_and_block_symmetric(self, small):
        prob, disc = small
        pen = ConcentricPenalty(alpha=prob.alpha)
        z = el.make_rotation_target(prob, disc)
        y, p, info = el.ssn_solve(prob, disc, pen, z, gamma=1.0)
        assert info["converged"]
        assert info["iterations"] <= 10
        # boundary dofs pinned to zero
        assert np.abs(y[disc.dirichlet]).max() < 1e-12
        assert np.abs(p[disc.dirichlet]).max() < 1e-12

    def test_continuation_multibang(self, small):
        prob, disc = small
        pen = ConcentricPenalty(alpha=prob.alpha)
        z = el.make_rotation_target(prob, disc)
        y, p, u, stats = el.continuation(prob, disc, pen, z,
                                         gamma0=1e2, gamma_min=1e-6)
        assert all(s["converged"] for s in stats)
        assert all(s["ssn"] <= 10 for s in stats)
        # the control on the clamped edge is forced to zero
        bottom = np.arange(prob.resolution)
        assert np.abs(u[bottom]).max() < 1e-12
        # beyond the clamped row (where 0 is not admissible) almost every
        # node is multibang at the final gamma
        assert stats[-1]["not_mb"] - prob.resolution <= 0.05 * disc.n_nodes

    def test_csv_outputs(self, small):
        prob, disc = small
        u = np.zeros((disc.n_nodes, 2))
        csv = el.control_csv(disc, u)
        assert len(csv.strip().split("\n")) == disc.n_nodes + 1
        mesh = el.deformed_mesh_csv(disc, np.zeros(disc.n_dofs))
        assert len(mesh.strip().split("\n")) == disc.n_nodes + 1
