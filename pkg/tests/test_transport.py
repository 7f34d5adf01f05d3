import numpy as np
import pytest

from multibang.models import transport as tr
from multibang.penalty import CostSpec, PenaltyEngine


def two_edge_path():
    # a -> b -> c on a line with unit spacing
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    edges = np.array([[0, 1], [1, 2]])
    return tr.TransportNetwork(verts, edges)


class TestNetwork:
    def test_lengths_from_coordinates(self):
        net = two_edge_path()
        assert np.allclose(net.lengths, [1.0, 1.0])

    def test_json_roundtrip(self):
        net = two_edge_path()
        clone = tr.TransportNetwork.from_json(net.to_json())
        assert np.allclose(clone.vertices, net.vertices)
        assert np.array_equal(clone.edges, net.edges)

    def test_connectivity(self):
        net = two_edge_path()
        assert net.is_connected()
        split = tr.TransportNetwork(
            np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0]]),
            np.array([[0, 1], [2, 3]]),
        )
        assert not split.is_connected()


class TestGenerateNetwork:
    def test_no_jitter_square(self):
        net = tr.generate_network(2, jitter=0.0, seed=0,
                                  prune_factor=np.inf)
        assert net.n_vertices == 4
        # four sides plus one diagonal
        assert net.n_edges == 5

    def test_deterministic(self):
        a = tr.generate_network(5, jitter=0.3, seed=42)
        b = tr.generate_network(5, jitter=0.3, seed=42)
        assert np.allclose(a.vertices, b.vertices)
        assert np.array_equal(a.edges, b.edges)

    def test_orientation_lexicographic(self):
        net = tr.generate_network(5, jitter=0.3, seed=1)
        assert np.all(net.edges[:, 0] < net.edges[:, 1])

    def test_pruning_removes_long_edges(self):
        full = tr.generate_network(6, jitter=0.3, seed=3,
                                   prune_factor=np.inf)
        pruned = tr.generate_network(6, jitter=0.3, seed=3,
                                     prune_factor=1.5)
        assert pruned.n_edges < full.n_edges
        assert pruned.lengths.max() <= 1.5 * np.median(full.lengths)


class TestDivergence:
    def test_single_edge(self):
        net = tr.TransportNetwork(
            np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0, 1]])
        )
        div = tr.divergence(net, np.array([[1.0]]))
        assert np.allclose(div, [[-1.0], [1.0]])

    def test_two_edge_path(self):
        net = two_edge_path()
        div = tr.divergence(net, np.ones((2, 1)))
        assert np.allclose(div, [[-1.0], [0.0], [1.0]])

    def test_conservation(self):
        net = tr.generate_network(5, jitter=0.3, seed=0)
        rng = np.random.default_rng(0)
        u = rng.normal(size=(net.n_edges, 3))
        assert np.abs(tr.divergence(net, u).sum(axis=0)).max() < 1e-12

    def test_adjoint_identity(self):
        net = tr.generate_network(6, jitter=0.3, seed=5)
        rng = np.random.default_rng(1)
        u = rng.normal(size=(net.n_edges, 2))
        z = rng.normal(size=(net.n_vertices, 2))
        lhs = float(np.sum(tr.divergence(net, u) * z))
        rhs = net.edge_inner(u, tr.divergence_adjoint(net, z))
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))

    def test_adjoint_single_edge_scaling(self):
        net = tr.TransportNetwork(
            np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([[0, 1]])
        )
        z = np.array([[0.0], [1.0]])
        assert np.allclose(tr.divergence_adjoint(net, z), [[0.5]])


class TestAdmissibleSet:
    def test_single_material(self):
        s = tr.build_admissible_set(1, [1.0])
        pts = sorted(float(p[0]) for p in np.asarray(s.points))
        assert pts == [-1.0, 0.0, 1.0]

    def test_two_materials(self):
        s = tr.build_admissible_set(2, [1.0, 1.0])
        assert len(s) == 7

    def test_three_materials(self):
        assert len(tr.build_admissible_set(3, [1.0, 1.0, 1.0])) == 15

    def test_sign_consistency(self):
        pts = np.asarray(tr.build_admissible_set(3, [1.0, 2.0, 3.0]).points)
        assert np.all((pts.min(axis=1) >= 0) | (pts.max(axis=1) <= 0))


class TestTargetsAndCost:
    def test_balanced_target(self):
        net = two_edge_path()
        z = tr.make_source_sink_target(net, [(0, 0, 2, 1.0)])
        assert np.allclose(z, [[1.0], [0.0], [-1.0]])

    def test_total_cost(self):
        net = two_edge_path()
        engine = PenaltyEngine(
            tr.build_admissible_set(1, [1.0]), CostSpec("norm", alpha=0.5)
        )
        u = np.array([[1.0], [1.0]])
        assert tr.total_cost(net, engine, u) == pytest.approx(1.0)
        assert tr.total_cost(net, engine, np.full((2, 1), 3.0)) == np.inf


class TestModel:
    def test_gradient_matches_fd(self):
        net = tr.generate_network(4, jitter=0.2, seed=2)
        rng = np.random.default_rng(3)
        z = rng.normal(size=(net.n_vertices, 2))
        z -= z.mean(axis=0)
        model = tr.TransportModel(net, z)
        u = rng.normal(size=(net.n_edges, 2))
        phi = rng.normal(size=(net.n_edges, 2))
        g = model.gradient(u)  # negative gradient in the weighted inner
        eps = 1e-6
        fd = (model.objective(u + eps * phi)
              - model.objective(u - eps * phi)) / (2 * eps)
        assert abs(-model.inner(g, phi) - fd) < 1e-6

    def test_hessian_is_gradient_jacobian(self):
        net = tr.generate_network(4, jitter=0.2, seed=4)
        rng = np.random.default_rng(5)
        z = rng.normal(size=(net.n_vertices, 1))
        z -= z.mean(axis=0)
        model = tr.TransportModel(net, z)
        u = rng.normal(size=(net.n_edges, 1))
        phi = rng.normal(size=(net.n_edges, 1))
        lhs = model.hessian_action(u, phi)
        rhs = model.gradient(u) - model.gradient(u + phi)
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_flux_csv(self):
        net = two_edge_path()
        csv = tr.flux_csv(net, np.ones((2, 1)))
        lines = csv.strip().split("\n")
        assert len(lines) == 3
        assert lines[0].startswith("edge,tail,head")
