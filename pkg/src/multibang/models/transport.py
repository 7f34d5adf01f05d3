"""Multimaterial branched transport on a directed graph.

Fluxes live on edges with the length-weighted inner product
(u, v) = sum_e l(e) u(e) . v(e); vertex fields carry unit weights.  The
divergence operator S sends edge fluxes to net vertex in/outflow, and the
tracking objective 1/2 |S u - z|^2 with a multibang penalty drives each
edge flux toward all-nonnegative or all-nonpositive material loads.
"""

import json

import numpy as np
import scipy.sparse.csgraph
import scipy.spatial

from ..penalty import AdmissibleSet


class TransportNetwork:
    """Directed graph with planar vertex coordinates and edge lengths."""

    def __init__(self, vertices, edges, lengths=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.edges = np.asarray(edges, dtype=int)
        if lengths is None:
            d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
            lengths = np.linalg.norm(d, axis=1)
        self.lengths = np.asarray(lengths, dtype=float)
        if np.any(self.lengths <= 0):
            raise ValueError("edge lengths must be positive")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_inner(self, u, v):
        return float(np.sum(self.lengths[:, None] * np.asarray(u) * np.asarray(v)))

    def is_connected(self):
        adj = scipy.sparse.coo_matrix(
            (np.ones(self.n_edges), (self.edges[:, 0], self.edges[:, 1])),
            shape=(self.n_vertices, self.n_vertices),
        )
        ncomp, _ = scipy.sparse.csgraph.connected_components(adj, directed=False)
        return ncomp == 1

    def to_json(self):
        return json.dumps({
            "vertices": self.vertices.tolist(),
            "edges": self.edges.tolist(),
        })

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, str) else text
        return cls(data["vertices"], data["edges"])


class DisconnectedNetwork(RuntimeError):
    pass


def generate_network(grid_n, jitter=0.3, seed=0, prune_factor=2.0):
    """Jittered grid vertices, Delaunay edges, with overly long edges
    removed.  Edge orientation is lexicographic (tail has smaller index)."""
    if grid_n < 2:
        raise ValueError("grid must have at least two points per side")
    rng = np.random.default_rng(seed)
    ax = np.arange(grid_n, dtype=float)
    X, Y = np.meshgrid(ax, ax, indexing="xy")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    pts = pts + rng.uniform(-jitter, jitter, size=pts.shape)

    tri = scipy.spatial.Delaunay(pts)
    pairs = set()
    for simplex in tri.simplices:
        for a in range(3):
            i, j = int(simplex[a]), int(simplex[(a + 1) % 3])
            pairs.add((min(i, j), max(i, j)))
    edges = np.array(sorted(pairs), dtype=int)
    lengths = np.linalg.norm(pts[edges[:, 1]] - pts[edges[:, 0]], axis=1)
    if np.isfinite(prune_factor):
        keep = lengths <= prune_factor * np.median(lengths)
        edges = edges[keep]
    net = TransportNetwork(pts, edges)
    if not net.is_connected():
        raise DisconnectedNetwork("pruning disconnected the network")
    return net


def divergence(net, u):
    """(S u)(x): flux into x minus flux out of x, per material."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    out = np.zeros((net.n_vertices, u.shape[1]))
    np.add.at(out, net.edges[:, 1], u)
    np.subtract.at(out, net.edges[:, 0], u)
    return out


def divergence_adjoint(net, z):
    """(S* z)(e) = (z(head) - z(tail)) / l(e), adjoint for unit vertex
    weights and length-weighted edge fields."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    diff = z[net.edges[:, 1]] - z[net.edges[:, 0]]
    return diff / net.lengths[:, None]


def build_admissible_set(m, amounts):
    """All-nonnegative and all-nonpositive material loadings: u_i in
    {0, m_i} for every i, or u_i in {0, -m_i}; 2^(m+1) - 1 points."""
    amounts = np.asarray(amounts, dtype=float)
    if len(amounts) != m or np.any(amounts <= 0):
        raise ValueError("need one positive amount per material")
    points = []
    for bits in range(2 ** m):
        v = np.array([(bits >> i) & 1 for i in range(m)], dtype=float) * amounts
        points.append(v)
        if bits:
            points.append(-v)
    return AdmissibleSet(np.array(points))


def make_source_sink_target(net, scenarios):
    """Vertex field z from a list of (material, source, sink, amount)."""
    materials = 1 + max(s[0] for s in scenarios)
    z = np.zeros((net.n_vertices, materials))
    for mat, src, snk, amount in scenarios:
        z[src, mat] += amount
        z[snk, mat] -= amount
    if np.abs(z.sum(axis=0)).max() > 1e-12:
        raise ValueError("sources and sinks do not balance")
    return z


def total_cost(net, engine, u):
    """Sum of l(e) g(u(e)); infinite outside the convex hull of the set."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    return float(sum(
        net.lengths[e] * engine.penalty_value(u[e]) for e in range(net.n_edges)
    ))


class TransportModel:
    """Reduced tracking objective F(u) = 1/2 |S u - z|^2 for the solver.

    The divergence is cached as a sparse incidence matrix so that gradient
    and Hessian applications inside GMRES are plain sparse products.
    """

    def __init__(self, net, z):
        self.net = net
        self.z = np.asarray(z, dtype=float)
        E = net.n_edges
        rows = np.concatenate([net.edges[:, 1], net.edges[:, 0]])
        cols = np.concatenate([np.arange(E), np.arange(E)])
        vals = np.concatenate([np.ones(E), -np.ones(E)])
        self.S = scipy.sparse.csr_matrix(
            (vals, (rows, cols)), shape=(net.n_vertices, E)
        )
        self.St = (self.S.T).tocsr()
        self.inv_len = 1.0 / net.lengths[:, None]

    def objective(self, u):
        r = self.S @ u - self.z
        return 0.5 * float(np.sum(r * r))

    def gradient(self, u):
        """Negative L2(E) gradient of the tracking objective."""
        return -self.inv_len * (self.St @ (self.S @ u - self.z))

    def hessian_action(self, u, phi):
        return self.inv_len * (self.St @ (self.S @ phi))

    def inner(self, u, v):
        return self.net.edge_inner(u, v)


def flux_csv(net, u):
    """CSV rows (edge, tail, head, u1...um) for flow-diagram plotting."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    m = u.shape[1]
    header = "edge,tail,head," + ",".join(f"u{i + 1}" for i in range(m))
    lines = [header]
    for e in range(net.n_edges):
        vals = ",".join(str(u[e, i]) for i in range(m))
        lines.append(f"{e},{net.edges[e, 0]},{net.edges[e, 1]},{vals}")
    return "\n".join(lines) + "\n"
