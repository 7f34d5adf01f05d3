"""Closed-form multibang maps for the two-level corner set in the plane.

The admissible set is the eight corners (s, t) with s, t in {-1, 1} and
{-2, 2}, with quadratic cost alpha/2 |v|^2, so the conjugate is
max(|q|_1 - alpha, 2 |q|_1 - 4 alpha).  The Yosida map and its Newton
derivative reduce to separable sign and threshold tests per component plus
two diagonal-band tests, and are evaluated here without a face search.
"""

import itertools

import numpy as np

from .. import numerics


class ConcentricPenalty:
    """Multibang penalty for {-1, 1}^2 union {-2, 2}^2."""

    def __init__(self, alpha=1.0):
        self.alpha = float(alpha)
        inner = np.array(list(itertools.product([-1.0, 1.0], repeat=2)))
        self.points = np.vstack([inner, 2.0 * inner])

    def conjugate_value(self, q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        l1 = np.sum(np.abs(q), axis=1)
        val = np.maximum(l1 - self.alpha, 2.0 * l1 - 4.0 * self.alpha)
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

    def _eta(self, x, gamma):
        a, g = self.alpha, gamma
        return np.where(
            x < 3 * a + g, g, np.where(x > 3 * a + 2 * g, 2 * g, x - 3 * a)
        )

    def classify(self, Q, gamma):
        """Sign labels (i, j) and level label k per row of Q.

        i and j are the component signs (0 inside the threshold band), k is
        -1 on the inner level, 1 on the outer level, 0 in between.
        """
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        a, g = self.alpha, gamma
        q1, q2 = np.abs(Q[:, 0]), np.abs(Q[:, 1])
        i = np.where(q1 <= self._eta(q2, gamma), 0, np.sign(Q[:, 0])).astype(int)
        j = np.where(q2 <= self._eta(q1, gamma), 0, np.sign(Q[:, 1])).astype(int)
        linf = np.maximum(q1, q2)
        l1 = q1 + q2
        k = np.zeros(len(Q), dtype=int)
        k[(linf < 3 * a + g) & (l1 < 3 * a + 2 * g)] = -1
        k[(linf > 3 * a + 2 * g) | (l1 > 3 * a + 4 * g)] = 1
        return i, j, k

    def yosida(self, Q, gamma):
        """h_gamma(q) evaluated row-wise; accepts a single point or array."""
        Q1 = np.atleast_2d(np.asarray(Q, dtype=float))
        i, j, k = self.classify(Q1, gamma)
        a, g = self.alpha, gamma
        out = np.empty_like(Q1)
        lvl = (k + 3) / 2.0  # 1 on the inner level, 2 on the outer

        corner = (i != 0) & (j != 0) & (k != 0)
        out[corner, 0] = lvl[corner] * i[corner]
        out[corner, 1] = lvl[corner] * j[corner]

        m = (i == 0) & (j != 0) & (k != 0)
        out[m, 0] = Q1[m, 0] / g
        out[m, 1] = lvl[m] * j[m]

        m = (i != 0) & (j == 0) & (k != 0)
        out[m, 0] = lvl[m] * i[m]
        out[m, 1] = Q1[m, 1] / g

        m = (i != 0) & (j != 0) & (k == 0)
        coef = (np.abs(Q1[m, 0]) + np.abs(Q1[m, 1]) - 3 * a) / (2 * g)
        out[m, 0] = coef * i[m]
        out[m, 1] = coef * j[m]

        m = np.abs(i) + np.abs(j) + np.abs(k) <= 1
        out[m, 0] = (Q1[m, 0] - 3 * a * i[m]) / g
        out[m, 1] = (Q1[m, 1] - 3 * a * j[m]) / g

        if np.asarray(Q, dtype=float).ndim == 1:
            return out[0]
        return out

    def newton_deriv(self, Q, gamma):
        """Newton derivative of the Yosida map, shape (n, 2, 2) or (2, 2)."""
        Q1 = np.atleast_2d(np.asarray(Q, dtype=float))
        i, j, k = self.classify(Q1, gamma)
        g = gamma
        out = np.zeros((len(Q1), 2, 2))

        m = np.abs(i) + np.abs(j) + np.abs(k) <= 1
        out[m] = np.eye(2) / g

        m = (np.abs(i) + np.abs(j) == 1) & (k != 0)
        v = np.stack([np.abs(j[m]), np.abs(i[m])], axis=1).astype(float)
        out[m] = v[:, :, None] * v[:, None, :] / g

        m = (i != 0) & (j != 0) & (k == 0)
        v = np.stack([i[m], j[m]], axis=1).astype(float)
        out[m] = v[:, :, None] * v[:, None, :] / (2 * g)

        if np.asarray(Q, dtype=float).ndim == 1:
            return out[0]
        return out

    def prox(self, q, gamma):
        """Resolvent of gamma * subdifferential of the conjugate."""
        q = np.asarray(q, dtype=float)
        return q - gamma * self.yosida(q, gamma)

    def region_grid_csv(self, lo, hi, resolution, gamma):
        """CSV rows (q1, q2, i, j, k) on a square grid of dual points."""
        xs = np.linspace(lo, hi, resolution)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        Q = np.stack([X.ravel(), Y.ravel()], axis=1)
        i, j, k = self.classify(Q, gamma)
        lines = ["q1,q2,i,j,k"]
        for r in range(len(Q)):
            lines.append(f"{Q[r, 0]},{Q[r, 1]},{i[r]},{j[r]},{k[r]}")
        return "\n".join(lines) + "\n"
