"""Closed-form multibang maps for radial admissible sets in the plane.

The admissible set consists of the origin together with d points of common
magnitude omega0 at angles theta_1 < ... < theta_d, with the quadratic cost
alpha/2 |v|^2.  The Yosida map and its Newton derivative then have explicit
piecewise formulas on a decomposition of the dual plane into sectors; this
module evaluates them vectorized over arrays of query points, without any
face search.
"""

import numpy as np

from .. import numerics

# region type codes used in classification output
Q_ZERO = 0
Q_SINGLE = 1
Q_ZERO_SINGLE = 2
Q_PAIR = 3
Q_ZERO_PAIR = 4


class RadialPenalty:
    """Multibang penalty for {0} union omega0*(cos theta_i, sin theta_i)."""

    def __init__(self, thetas, omega0=1.0, alpha=1.0):
        thetas = np.sort(np.asarray(thetas, dtype=float))
        if len(thetas) < 2:
            raise ValueError("need at least two circle points")
        self.thetas = thetas
        self.omega0 = float(omega0)
        self.alpha = float(alpha)
        self.ubar = omega0 * np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        self.points = np.vstack([np.zeros(2), self.ubar])

    @property
    def d(self):
        return len(self.thetas)

    def conjugate_value(self, q):
        """g*(q) = max(0, max_i <q, ubar_i> - alpha omega0^2 / 2)."""
        q = np.atleast_2d(np.asarray(q, dtype=float))
        rho = np.max(q @ self.ubar.T, axis=1)
        val = np.maximum(0.0, rho - 0.5 * self.alpha * self.omega0**2)
        return val if len(val) > 1 else float(val[0])

    def penalty_value(self, u):
        """Convexified cost at u via the convex-combination program."""
        u = np.asarray(u, dtype=float)
        offs = 0.5 * self.alpha * np.sum(self.points**2, axis=1)
        E = np.vstack([self.points.T, np.ones(len(self.points))])
        r = np.append(u, 1.0)
        try:
            value, _ = numerics.solve_lp(offs, E, r)
        except numerics.LPInfeasible:
            return np.inf
        return value

    def classify(self, Q, gamma):
        """Region code, primary index i and partner index j for each row of Q.

        Codes: 0 origin region, 1 single point, 2 origin/point segment,
        3 point/point segment, 4 origin/point/point triangle.
        """
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        n = len(Q)
        a, g, w2 = self.alpha, gamma, self.omega0**2
        U = self.ubar
        ips = Q @ U.T
        i_q = np.argmax(ips, axis=1)
        rho = ips[np.arange(n), i_q]

        code = np.full(n, -1, dtype=int)
        part = np.zeros(n, dtype=int)

        mask0 = rho < 0.5 * a * w2
        code[mask0] = Q_ZERO

        rem = ~mask0
        j_q = np.argmax((Q - g * U[i_q]) @ U.T, axis=1)
        shift = (rho / w2 - 0.5 * a)[:, None] * U[i_q]
        k_q = np.argmax((Q - shift) @ U.T, axis=1)

        single = rem & (rho > (0.5 * a + g) * w2) & (i_q == j_q)
        code[single] = Q_SINGLE
        rem &= ~single

        seg0 = rem & (rho <= (0.5 * a + g) * w2) & (k_q == i_q)
        code[seg0] = Q_ZERO_SINGLE
        rem &= ~seg0

        # sigma uses the shifted-argmax sector, the pair region additionally
        # requires i_q and j_q to be angular neighbours
        vs = U[i_q] + U[j_q]
        sigma = np.sum((Q - 0.5 * g * vs) * vs, axis=1)
        adjacent = ((j_q - i_q) % self.d == 1) | ((i_q - j_q) % self.d == 1)

        # partner for the triangle region: the neighbour on the side of q
        cross = U[i_q, 0] * Q[:, 1] - U[i_q, 1] * Q[:, 0]
        step = np.where(cross >= 0, 1, -1)
        part = np.where((i_q != j_q) & adjacent, j_q, (i_q + step) % self.d)

        pair = rem & (i_q != j_q) & adjacent & (sigma > a * w2)
        code[pair] = Q_PAIR
        rem &= ~pair

        code[rem] = Q_ZERO_PAIR
        return code, i_q, part

    def yosida(self, Q, gamma):
        """h_gamma(q) evaluated row-wise; accepts a single point or array."""
        Q1 = np.atleast_2d(np.asarray(Q, dtype=float))
        code, i, j = self.classify(Q1, gamma)
        a, g, w2 = self.alpha, gamma, self.omega0**2
        U = self.ubar
        out = np.zeros_like(Q1)

        m = code == Q_SINGLE
        out[m] = U[i[m]]

        m = code == Q_ZERO_SINGLE
        rho = np.sum(Q1[m] * U[i[m]], axis=1)
        out[m] = ((rho / (g * w2) - 0.5 * a / g))[:, None] * U[i[m]]

        m = code == Q_PAIR
        d = U[i[m]] - U[j[m]]
        mid = 0.5 * (U[i[m]] + U[j[m]])
        coef = np.sum(Q1[m] * d, axis=1) / (g * np.sum(d * d, axis=1))
        out[m] = mid + coef[:, None] * d

        m = code == Q_ZERO_PAIR
        v = U[i[m]] + U[j[m]]
        scale = (a / g) * w2 / np.sum(v * v, axis=1)
        out[m] = Q1[m] / g - scale[:, None] * v

        if np.asarray(Q, dtype=float).ndim == 1:
            return out[0]
        return out

    def newton_deriv(self, Q, gamma):
        """Newton derivative of the Yosida map, shape (n, 2, 2) or (2, 2)."""
        Q1 = np.atleast_2d(np.asarray(Q, dtype=float))
        code, i, j = self.classify(Q1, gamma)
        g, w2 = gamma, self.omega0**2
        U = self.ubar
        out = np.zeros((len(Q1), 2, 2))

        m = code == Q_ZERO_SINGLE
        out[m] = U[i[m], :, None] * U[i[m], None, :] / (g * w2)

        m = code == Q_PAIR
        d = U[i[m]] - U[j[m]]
        nrm = np.sum(d * d, axis=1)
        out[m] = d[:, :, None] * d[:, None, :] / (g * nrm)[:, None, None]

        m = code == Q_ZERO_PAIR
        out[m] = np.eye(2) / g

        if np.asarray(Q, dtype=float).ndim == 1:
            return out[0]
        return out

    def prox(self, q, gamma):
        """Resolvent of gamma * subdifferential of the conjugate."""
        q = np.asarray(q, dtype=float)
        return q - gamma * self.yosida(q, gamma)

    def region_grid_csv(self, lo, hi, resolution, gamma):
        """CSV rows (q1, q2, code, i, j) on a square grid of dual points."""
        xs = np.linspace(lo, hi, resolution)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        Q = np.stack([X.ravel(), Y.ravel()], axis=1)
        code, i, j = self.classify(Q, gamma)
        lines = ["q1,q2,code,i,j"]
        for r in range(len(Q)):
            lines.append(f"{Q[r, 0]},{Q[r, 1]},{code[r]},{i[r]},{j[r]}")
        return "\n".join(lines) + "\n"
