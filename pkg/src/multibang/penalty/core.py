"""General polyhedral multibang penalty engine for arbitrary finite value sets.

Given a finite set of admissible control values and a convex cost, the
penalty is the convex envelope of (cost + indicator of the set).  Its
conjugate is a maximum of affine pieces; the engine enumerates the nonempty
faces of the conjugate's epigraph once, precomputes per-face affine solution
blocks of the resolvent system, and evaluates the proximal map, the Yosida
map and its Newton derivative by face lookup.
"""

import itertools
import json
import math

import numpy as np
import scipy.optimize

from .. import numerics

INFINITE = math.inf


class CostSpec:
    """Pointwise control cost: quadratic (|v|^2/2), norm (|v|), or explicit
    per-point values, scaled by alpha >= 0."""

    def __init__(self, kind="quadratic", alpha=1.0, values=None):
        if kind not in ("quadratic", "norm", "explicit"):
            raise ValueError(f"unknown cost kind {kind!r}")
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if kind == "explicit" and values is None:
            raise ValueError("explicit cost needs per-point values")
        self.kind = kind
        self.alpha = float(alpha)
        self.values = None if values is None else np.asarray(values, dtype=float)

    def at_points(self, points):
        """alpha * c(u_i) for each point of the admissible set."""
        points = np.asarray(points, dtype=float)
        if self.kind == "quadratic":
            c = 0.5 * np.sum(points**2, axis=1)
        elif self.kind == "norm":
            c = np.linalg.norm(points, axis=1)
        else:
            if len(self.values) != len(points):
                raise ValueError("explicit cost values do not match point count")
            c = self.values
        return self.alpha * c


class AdmissibleSet:
    """Finite set of pairwise-distinct admissible control values in R^m."""

    def __init__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or len(points) < 1:
            raise ValueError("need a nonempty 2-D point array")
        for a, b in itertools.combinations(range(len(points)), 2):
            if np.allclose(points[a], points[b]):
                raise ValueError("admissible points must be pairwise distinct")
        self.points = points

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)


class EpigraphFace:
    """A nonempty face of the conjugate's epigraph, identified by the index
    set of active affine pieces, with the affine resolvent solution
    w = A q + b, lam_l = A_l q + b_l (computed per gamma)."""

    def __init__(self, indices):
        self.indices = tuple(indices)

    def __repr__(self):
        return f"EpigraphFace{self.indices}"


class NoFaceMatched(RuntimeError):
    pass


def enumerate_faces(admissible, cost, max_points=20):
    """List the index subsets whose affine pieces are simultaneously maximal
    (and strictly dominant over the rest) somewhere in R^m.

    Exhaustive over subsets with an LP feasibility test per candidate,
    pruned by a consistency check of the tie equations.
    """
    n = len(admissible)
    if n > max_points:
        raise ValueError(f"face enumeration limited to {max_points} points")
    U = admissible.points
    offsets = cost.at_points(U)
    m = admissible.dim
    faces = []
    box = 10.0 * (1.0 + np.abs(U).max() + np.abs(offsets).max())
    for k in range(1, n + 1):
        for idx in itertools.combinations(range(n), k):
            if k > 1:
                D = U[list(idx[1:])] - U[idx[0]]
                rhs = offsets[list(idx[1:])] - offsets[idx[0]]
                sol, *_ = np.linalg.lstsq(D, rhs, rcond=None)
                if np.max(np.abs(D @ sol - rhs)) > 1e-9:
                    continue  # tie set empty
            if _face_nonempty(U, offsets, idx, box):
                faces.append(EpigraphFace(idx))
    return faces


def _face_nonempty(U, offsets, idx, box):
    """LP: exists q with pieces in idx tied and strictly above the rest."""
    n, m = U.shape
    others = [j for j in range(n) if j not in idx]
    i0 = idx[0]
    A_eq, b_eq = [], []
    for l in idx[1:]:
        A_eq.append(np.append(U[l] - U[i0], 0.0))
        b_eq.append(offsets[l] - offsets[i0])
    # maximize t s.t. <u_i0 - u_j, q> - t >= offsets_i0 - offsets_j
    A_ub, b_ub = [], []
    for j in others:
        A_ub.append(np.append(U[j] - U[i0], 1.0))
        b_ub.append(offsets[j] - offsets[i0])
    c = np.zeros(m + 1)
    c[-1] = -1.0
    bounds = [(-box, box)] * m + [(None, 1.0)]
    res = scipy.optimize.linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    return res.success and res.x[-1] > 1e-9


class PenaltyEngine:
    """Evaluates the multibang penalty, its conjugate, prox, Yosida map and
    Newton derivative for a finite admissible set and cost.

    Immutable after construction; per-gamma face blocks are cached.
    """

    def __init__(self, admissible, cost, max_points=20):
        if isinstance(admissible, (list, np.ndarray)):
            admissible = AdmissibleSet(admissible)
        self.set = admissible
        self.cost = cost
        self.offsets = cost.at_points(admissible.points)
        self.faces = enumerate_faces(admissible, cost, max_points=max_points)
        self._gamma_blocks = {}
        self._oracle = numerics.ProxOracle(admissible.points, self.offsets)
        self._lambda_tol = 1e-9
        self._margin_tol = 1e-9

    @property
    def dim(self):
        return self.set.dim

    @property
    def points(self):
        return self.set.points

    # -- plain evaluations ------------------------------------------------

    def conjugate_value(self, q):
        """max_i <u_i, q> - alpha c(u_i)."""
        q = np.asarray(q, dtype=float)
        if q.shape[0] != self.dim:
            raise numerics.DimensionMismatch("query dimension mismatch")
        return float(np.max(self.set.points @ q - self.offsets))

    def penalty_value(self, u):
        """Convexified cost at u: an LP over convex combinations; +inf
        outside the convex hull of the admissible set."""
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.dim:
            raise numerics.DimensionMismatch("query dimension mismatch")
        n = len(self.set)
        E = np.vstack([self.set.points.T, np.ones(n)])
        r = np.append(u, 1.0)
        try:
            value, _ = numerics.solve_lp(self.offsets, E, r)
        except numerics.LPInfeasible:
            return INFINITE
        return value

    def multibang_distance(self, u):
        """Euclidean distance of u to the nearest admissible point."""
        u = np.asarray(u, dtype=float)
        return float(np.min(np.linalg.norm(self.set.points - u, axis=1)))

    # -- face machinery ---------------------------------------------------

    def _blocks(self, gamma):
        blocks = self._gamma_blocks.get(gamma)
        if blocks is not None:
            return blocks
        m = self.dim
        blocks = []
        for face in self.faces:
            idx = face.indices
            k = len(idx)
            U = self.set.points[list(idx)]
            off = self.offsets[list(idx)]
            nrow = (k - 1) + m + 1
            sysmat = np.zeros((nrow, m + k))
            rhs_q = np.zeros((nrow, m))
            rhs_const = np.zeros(nrow)
            for l in range(1, k):
                sysmat[l - 1, :m] = U[l] - U[0]
                rhs_const[l - 1] = off[l] - off[0]
            sysmat[k - 1 : k - 1 + m, :m] = np.eye(m)
            sysmat[k - 1 : k - 1 + m, m:] = gamma * U.T
            rhs_q[k - 1 : k - 1 + m] = np.eye(m)
            sysmat[-1, m:] = 1.0
            rhs_const[-1] = 1.0
            # minimum-norm solution of the (possibly singular) face system
            pinv = np.linalg.pinv(sysmat, rcond=1e-12)
            A_full = pinv @ rhs_q
            b_full = pinv @ rhs_const
            blocks.append((face, A_full[:m], b_full[:m], A_full[m:], b_full[m:]))
        self._gamma_blocks[gamma] = blocks
        return blocks

    def prox(self, q, gamma):
        """Proximal map of gamma * conjugate at q.  Returns (w, face).  A
        2-D argument is treated as a stack of query points and yields
        (W, face index per row, -1 where the oracle fallback resolved the
        query)."""
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        q = np.asarray(q, dtype=float)
        if q.ndim == 2:
            W, chosen = self._prox_many(q, gamma)
            for i in np.flatnonzero(chosen < 0):
                W[i], _ = self._oracle.prox(q[i], gamma)
            return W, chosen
        if q.shape[0] != self.dim:
            raise numerics.DimensionMismatch("query dimension mismatch")
        ltol = self._lambda_tol
        mtol = self._margin_tol
        matches = []
        for face, A, b, Al, bl in self._blocks(gamma):
            lam = Al @ q + bl
            if lam.min() < -ltol or lam.max() > 1 + ltol:
                continue
            w = A @ q + b
            vals = self.set.points @ w - self.offsets
            active_val = vals[face.indices[0]]
            mask = np.ones(len(vals), dtype=bool)
            mask[list(face.indices)] = False
            if mask.any() and vals[mask].max() > active_val + mtol:
                continue
            matches.append((face, w, lam))
        if not matches:
            # numerical degeneracy: fall back to the brute-force oracle
            w, idx = self._oracle.prox(q, gamma)
            return w, EpigraphFace(idx)
        # largest active set first, then lexicographically smallest
        matches.sort(key=lambda t: (-len(t[0].indices), t[0].indices))
        face, w, _ = matches[0]
        return w, face

    def yosida(self, q, gamma):
        """Yosida map h_gamma(q) = (q - prox(q)) / gamma; a 2-D argument is
        treated as a stack of query points."""
        q = np.asarray(q, dtype=float)
        if q.ndim == 2:
            return self.yosida_many(q, gamma)
        w, _ = self.prox(q, gamma)
        return (q - w) / gamma

    def newton_deriv(self, q, gamma):
        """Newton derivative of the Yosida map: (Id - A_face)/gamma for the
        face selected by prox.  A 2-D argument yields stacked derivatives."""
        q = np.asarray(q, dtype=float)
        if q.ndim == 2:
            return self.newton_deriv_many(q, gamma)
        w, face = self.prox(q, gamma)
        for f, A, b, _, _ in self._blocks(gamma):
            if f.indices == face.indices:
                return (np.eye(self.dim) - A) / gamma
        # face came from the oracle fallback: build its block on the fly
        sub = PenaltyEngineFaceBlock(self, face.indices, gamma)
        return (np.eye(self.dim) - sub.A) / gamma

    # -- vectorized application over node arrays ---------------------------

    def _prox_many(self, Q, gamma):
        """Vectorized prox over query rows: for each face the affine blocks
        are applied to all queries at once, validity is tested by masks, and
        the face ranking (largest active set, then lexicographic) is applied
        by filling in rank order.  Returns (W, face index per row, -1 where
        no face matched)."""
        Q = np.asarray(Q, dtype=float)
        n = len(Q)
        ltol = self._lambda_tol
        mtol = self._margin_tol
        W = np.empty_like(Q)
        chosen = np.full(n, -1, dtype=int)
        blocks = self._blocks(gamma)
        order = sorted(range(len(blocks)),
                       key=lambda i: (-len(blocks[i][0].indices),
                                      blocks[i][0].indices))
        U_all = self.set.points
        for bi in order:
            open_rows = chosen < 0
            if not open_rows.any():
                break
            face, A, b, Al, bl = blocks[bi]
            idx = list(face.indices)
            Qo = Q[open_rows]
            lam = Qo @ Al.T + bl
            ok = (lam.min(axis=1) >= -ltol) & (lam.max(axis=1) <= 1 + ltol)
            if not ok.any():
                continue
            w = Qo @ A.T + b
            # resolvent and tie equations must actually hold (the blocks are
            # minimum-norm solves and silently ignore inconsistency)
            res = w + gamma * (lam @ U_all[idx]) - Qo
            ok &= np.abs(res).max(axis=1) <= 1e-8 * (1 + np.abs(Qo).max())
            vals = w @ U_all.T - self.offsets
            active = vals[:, idx[0]]
            if len(idx) > 1:
                D = U_all[idx[1:]] - U_all[idx[0]]
                off = self.offsets[idx[1:]] - self.offsets[idx[0]]
                ok &= np.abs(w @ D.T - off).max(axis=1) <= mtol * (
                    1 + np.abs(active)
                )
            mask = np.ones(len(U_all), dtype=bool)
            mask[idx] = False
            if mask.any():
                ok &= vals[:, mask].max(axis=1) <= active + mtol
            if not ok.any():
                continue
            rows = np.flatnonzero(open_rows)[ok]
            W[rows] = w[ok]
            chosen[rows] = bi
        return W, chosen

    def yosida_many(self, Q, gamma):
        """Apply the Yosida map row-wise to an (n, m) array."""
        Q = np.asarray(Q, dtype=float)
        W, chosen = self._prox_many(Q, gamma)
        for i in np.flatnonzero(chosen < 0):
            W[i], _ = self._oracle.prox(Q[i], gamma)
        return (Q - W) / gamma

    def newton_deriv_many(self, Q, gamma):
        """Row-wise Newton derivatives, shape (n, m, m)."""
        Q = np.asarray(Q, dtype=float)
        n, m = Q.shape
        _, chosen = self._prox_many(Q, gamma)
        blocks = self._blocks(gamma)
        out = np.empty((n, m, m))
        eye = np.eye(m)
        for bi in np.unique(chosen):
            rows = chosen == bi
            if bi < 0:
                for i in np.flatnonzero(rows):
                    out[i] = self.newton_deriv(Q[i], gamma)
            else:
                out[rows] = (eye - blocks[bi][1]) / gamma
        return out

    # -- interchange ------------------------------------------------------

    @classmethod
    def from_json(cls, text):
        """Build an engine from {dimension, points, cost, alpha} JSON."""
        data = json.loads(text) if isinstance(text, str) else text
        points = np.asarray(data["points"], dtype=float)
        if points.shape[1] != data["dimension"]:
            raise ValueError("points do not match declared dimension")
        cost = CostSpec(kind=data.get("cost", "quadratic"), alpha=data.get("alpha", 1.0),
                        values=data.get("values"))
        return cls(AdmissibleSet(points), cost)

    def region_grid_csv(self, lo, hi, resolution, gamma):
        """CSV rows (q1, q2, face-id) classifying a 2-D grid; face ids index
        the engine's face list."""
        if self.dim != 2:
            raise ValueError("grid export only for two-dimensional sets")
        face_ids = {f.indices: i for i, f in enumerate(self.faces)}
        lines = ["q1,q2,face"]
        xs = np.linspace(lo, hi, resolution)
        for x in xs:
            for y in xs:
                _, face = self.prox(np.array([x, y]), gamma)
                fid = face_ids.get(face.indices, -1)
                lines.append(f"{x},{y},{fid}")
        return "\n".join(lines) + "\n"


class PenaltyEngineFaceBlock:
    """Affine resolvent block for a single index set (used for faces that
    were discovered through the oracle fallback)."""

    def __init__(self, engine, indices, gamma):
        m = engine.dim
        idx = list(indices)
        k = len(idx)
        U = engine.set.points[idx]
        off = engine.offsets[idx]
        nrow = (k - 1) + m + 1
        sysmat = np.zeros((nrow, m + k))
        rhs_q = np.zeros((nrow, m))
        rhs_const = np.zeros(nrow)
        for l in range(1, k):
            sysmat[l - 1, :m] = U[l] - U[0]
            rhs_const[l - 1] = off[l] - off[0]
        sysmat[k - 1 : k - 1 + m, :m] = np.eye(m)
        sysmat[k - 1 : k - 1 + m, m:] = gamma * U.T
        rhs_q[k - 1 : k - 1 + m] = np.eye(m)
        sysmat[-1, m:] = 1.0
        rhs_const[-1] = 1.0
        pinv = np.linalg.pinv(sysmat, rcond=1e-12)
        self.A = (pinv @ rhs_q)[:m]
        self.b = (pinv @ rhs_const)[:m]
