"""Linearized elasticity with multibang body forces.

P1 finite elements on a structured triangulation of [0,1] x [0,2], clamped
along the bottom edge.  The state operator maps a nodal control u to the
displacement y solving A_h y = M_h u, and the tracking objective
1/2 |y - z|^2 leads to the coupled optimality system

    A_h^T p + M_h y = Z_h,      A_h y = M_h h_gamma(p),

solved by a semismooth Newton iteration on the symmetric block system with
a sparse direct factorization.  Degrees of freedom are interleaved (both
displacement components per node), so the nodal Newton derivative of the
Yosida map stays 2x2-block diagonal.
"""

import numpy as np
import scipy.sparse as sp

from .. import numerics


class ElasticityProblem:
    """Material constants, mesh resolution and penalty weight."""

    def __init__(self, E=20.0, nu=0.3, resolution=129, alpha=1e-3):
        if not 0 < nu < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 1/2)")
        if E <= 0:
            raise ValueError("elastic modulus must be positive")
        if resolution < 2:
            raise ValueError("need at least two vertices per direction")
        self.E = float(E)
        self.nu = float(nu)
        self.resolution = int(resolution)
        self.alpha = float(alpha)

    @property
    def mu(self):
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self):
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))


class FemDiscretization:
    """Mesh plus assembled matrices.

    M, L, K, A are the vector-valued mass, symmetric-gradient, divergence
    and elasticity matrices without boundary conditions; Ad and Md carry
    the symmetric Dirichlet elimination (Ad has unit diagonal entries on
    constrained dofs, Md zero rows and columns).
    """

    def __init__(self, nodes, triangles, M, L, K, A, dirichlet):
        self.nodes = nodes
        self.triangles = triangles
        self.M = M
        self.L = L
        self.K = K
        self.A = A
        self.dirichlet = np.asarray(dirichlet, dtype=int)
        free = np.ones(A.shape[0], dtype=bool)
        free[self.dirichlet] = False
        self.free = np.flatnonzero(free)
        self.Ad = _eliminate(A, self.dirichlet, unit_diagonal=True)
        self.Md = _eliminate(M, self.dirichlet, unit_diagonal=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_dofs(self):
        return 2 * self.n_nodes


def _eliminate(A, dirichlet, unit_diagonal):
    """Zero rows and columns of the constrained dofs, optionally restoring
    ones on the diagonal."""
    A = A.tolil(copy=True)
    A[dirichlet, :] = 0.0
    A[:, dirichlet] = 0.0
    if unit_diagonal:
        A[dirichlet, dirichlet] = 1.0
    return A.tocsr()


def assemble(problem):
    """Structured mesh and P1 matrices for the 1 x 2 rectangle."""
    res = problem.resolution
    xs = np.linspace(0.0, 1.0, res)
    ys = np.linspace(0.0, 2.0, res)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def nid(ix, iy):
        return iy * res + ix

    tris = []
    for iy in range(res - 1):
        for ix in range(res - 1):
            ll, lr = nid(ix, iy), nid(ix + 1, iy)
            ul, ur = nid(ix, iy + 1), nid(ix + 1, iy + 1)
            # split along the lower-left to upper-right diagonal
            tris.append((ll, lr, ur))
            tris.append((ll, ur, ul))
    tris = np.asarray(tris, dtype=int)

    P = nodes[tris]  # (nt, 3, 2)
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    assert np.all(det > 1e-14), "degenerate triangle in structured mesh"
    area = 0.5 * det
    # constant P1 gradients: rows of inv([e1; e2]) pattern
    g = np.empty((len(tris), 3, 2))
    g[:, 1, 0] = e2[:, 1] / det
    g[:, 1, 1] = -e2[:, 0] / det
    g[:, 2, 0] = -e1[:, 1] / det
    g[:, 2, 1] = e1[:, 0] / det
    g[:, 0] = -g[:, 1] - g[:, 2]

    # vector P1 element matrices, interleaved local dofs (i, c) -> 2i + c
    nt = len(tris)
    Le = np.empty((nt, 6, 6))
    Ke = np.empty((nt, 6, 6))
    Me = np.zeros((nt, 6, 6))
    gg = np.einsum("tia,tja->tij", g, g)  # grad dot grad
    mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    for i in range(3):
        for j in range(3):
            for c in range(2):
                for d in range(2):
                    Le[:, 2 * i + c, 2 * j + d] = 0.5 * (
                        (c == d) * gg[:, i, j] + g[:, i, d] * g[:, j, c]
                    )
                    Ke[:, 2 * i + c, 2 * j + d] = g[:, i, c] * g[:, j, d]
                    if c == d:
                        Me[:, 2 * i + c, 2 * j + d] = mass[i, j]
    Le *= area[:, None, None]
    Ke *= area[:, None, None]
    Me *= area[:, None, None]

    dofs = np.empty((nt, 6), dtype=int)
    dofs[:, 0::2] = 2 * tris
    dofs[:, 1::2] = 2 * tris + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    ndof = 2 * len(nodes)

    def build(elem):
        mat = sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(ndof, ndof))
        return mat.tocsr()

    L = build(Le)
    K = build(Ke)
    M = build(Me)
    A = (2.0 * problem.mu * L + problem.lam * K).tocsr()

    bottom = np.arange(res)  # nodes with y = 0
    dirichlet = np.concatenate([2 * bottom, 2 * bottom + 1])
    return FemDiscretization(nodes, tris, M, L, K, A, dirichlet)


def make_rotation_target(problem, disc, angle=np.pi / 4):
    """Nodal target z(x) = R(x - (1/2, 1)) - x for the rotation R(angle)."""
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    centered = disc.nodes - np.array([0.5, 1.0])
    return centered @ R.T - disc.nodes


def make_deadload_target(problem, disc, magnitude=1.0, noise=0.0, seed=0):
    """Displacement induced by a leftward load on the top edge, optionally
    perturbed by seeded uniform noise."""
    res = problem.resolution
    top = np.arange(res * (res - 1), res * res)
    f = np.zeros(disc.n_dofs)
    f[2 * top] = -magnitude
    f[disc.dirichlet] = 0.0
    y = numerics.sparse_direct_solve(disc.Ad.tocsc(), f)
    z = y.reshape(-1, 2)
    if noise > 0:
        rng = np.random.default_rng(seed)
        z = z + rng.uniform(-noise, noise, size=z.shape)
    return z


def residual(problem, disc, engine, y, p, z, gamma):
    """Paired residual of the optimality system; y, p are interleaved dof
    vectors, z is the nodal target field."""
    # target and control terms keep the full mass matrix so that integrals
    # over boundary-adjacent cells see the boundary values of z and h
    Z = disc.M @ z.ravel()
    h = engine.yosida(p.reshape(-1, 2), gamma).ravel()
    r1 = disc.Ad.T @ p + disc.Md @ y - Z
    r2 = disc.Ad @ y - disc.M @ h
    # constrained dofs pin y and p to zero directly
    r1[disc.dirichlet] = p[disc.dirichlet]
    r2[disc.dirichlet] = y[disc.dirichlet]
    return r1, r2


def _newton_blockdiag(DN):
    """Sparse block-diagonal matrix from per-node 2x2 blocks."""
    n = len(DN)
    base = 2 * np.repeat(np.arange(n), 4)
    rows = base + np.tile([0, 0, 1, 1], n)
    cols = base + np.tile([0, 1, 0, 1], n)
    return sp.coo_matrix((DN.ravel(), (rows, cols)), shape=(2 * n, 2 * n)).tocsr()


def newton_block_solve(disc, DN, r1, r2):
    """Solve the symmetric block Newton system

        [[Md, Ad^T], [Ad, -Md D]] (dy, dp) = -(r1, r2)

    with D the nodal block-diagonal Newton derivative."""
    D = _newton_blockdiag(DN)
    block = sp.bmat(
        [[disc.Md, disc.Ad.T], [disc.Ad, -(disc.Md @ D)]], format="csc"
    )
    rhs = -np.concatenate([r1, r2])
    sol = numerics.sparse_direct_solve(block, rhs)
    ndof = disc.n_dofs
    return sol[:ndof], sol[ndof:]


def _tags(engine, P, gamma):
    """Integer active-set labels per node for the termination test."""
    if hasattr(engine, "classify"):
        return np.column_stack(engine.classify(P, gamma))
    labels = np.full((len(P), 1), -1, dtype=int)
    face_ids = {f.indices: i for i, f in enumerate(engine.faces)}
    for i, q in enumerate(P):
        _, face = engine.prox(q, gamma)
        labels[i, 0] = face_ids.get(face.indices, -1)
    return labels


def ssn_solve(problem, disc, engine, z, gamma, y0=None, p0=None, max_iter=50):
    """Newton iteration on the block system; stops when the nodal
    active-set labels agree for two consecutive iterates."""
    y = np.zeros(disc.n_dofs) if y0 is None else np.array(y0, dtype=float)
    p = np.zeros(disc.n_dofs) if p0 is None else np.array(p0, dtype=float)
    tags = _tags(engine, p.reshape(-1, 2), gamma)
    converged = False
    residuals = []
    iterations = 0
    for k in range(max_iter):
        r1, r2 = residual(problem, disc, engine, y, p, z, gamma)
        residuals.append(float(np.sqrt(np.dot(r1, r1) + np.dot(r2, r2))))
        DN = engine.newton_deriv(p.reshape(-1, 2), gamma)
        dy, dp = newton_block_solve(disc, DN, r1, r2)
        y = y + dy
        p = p + dp
        iterations = k + 1
        new_tags = _tags(engine, p.reshape(-1, 2), gamma)
        if np.array_equal(new_tags, tags):
            converged = True
            tags = new_tags
            break
        tags = new_tags
    return y, p, {"converged": converged, "iterations": iterations,
                  "residuals": residuals}


def continuation(problem, disc, engine, z, gamma0=1e2, gamma_min=1e-5,
                 reduction=0.5, mb_tol=1e-3, max_iter=50):
    """Fixed-factor continuation in gamma with warm starts.

    Returns (y, p, u, stats) where u is the nodal control h_gamma(p) at the
    final gamma and stats records per-gamma iteration counts.
    """
    y = np.zeros(disc.n_dofs)
    p = np.zeros(disc.n_dofs)
    stats = []
    gamma = gamma0
    u = engine.yosida(p.reshape(-1, 2), gamma)
    while gamma >= gamma_min:
        y_new, p_new, info = ssn_solve(
            problem, disc, engine, z, gamma, y0=y, p0=p, max_iter=max_iter
        )
        if not info["converged"]:
            stats.append({"gamma": gamma, "ssn": info["iterations"],
                          "not_mb": _count_not_mb(engine, u, mb_tol),
                          "converged": False})
            break
        y, p = y_new, p_new
        u = engine.yosida(p.reshape(-1, 2), gamma)
        stats.append({"gamma": gamma, "ssn": info["iterations"],
                      "not_mb": _count_not_mb(engine, u, mb_tol),
                      "converged": True})
        gamma *= reduction
    return y, p, u, stats


def _count_not_mb(engine, u, tol):
    d2 = np.sum((u[:, None, :] - engine.points[None, :, :]) ** 2, axis=2)
    return int(np.sum(np.sqrt(d2.min(axis=1)) > tol))


def control_csv(disc, u):
    """CSV rows (x1, x2, u1, u2) of the nodal control field."""
    lines = ["x1,x2,u1,u2"]
    for i in range(disc.n_nodes):
        lines.append(
            f"{disc.nodes[i, 0]},{disc.nodes[i, 1]},{u[i, 0]},{u[i, 1]}"
        )
    return "\n".join(lines) + "\n"


def deformed_mesh_csv(disc, y):
    """CSV rows (x1, x2, y1, y2, x1+y1, x2+y2) of the deformed mesh."""
    Y = y.reshape(-1, 2)
    lines = ["x1,x2,y1,y2,d1,d2"]
    for i in range(disc.n_nodes):
        x1, x2 = disc.nodes[i]
        lines.append(f"{x1},{x2},{Y[i, 0]},{Y[i, 1]},{x1 + Y[i, 0]},{x2 + Y[i, 1]}")
    return "\n".join(lines) + "\n"
