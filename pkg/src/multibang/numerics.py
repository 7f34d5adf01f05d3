"""Shared numerical kernels: dense/sparse solves, matrix-free GMRES, LP and QP oracles.

These are the building blocks used by the penalty engines and the semismooth
Newton solvers.  All functions are pure and safe for concurrent use.
"""

import itertools

import numpy as np
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class DimensionMismatch(ValueError):
    pass


class LPInfeasible(RuntimeError):
    pass


class LPUnbounded(RuntimeError):
    pass


class SingularSystem(RuntimeError):
    pass


def solve_dense(A, b, rank_tol_factor=1e-12):
    """Solve A x = b; for singular/rectangular A return the minimum-norm
    least-squares solution (rank-revealing SVD)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"A is {A.shape}, b has length {b.shape[0]}")
    scale = np.linalg.norm(A)
    rcond = rank_tol_factor if scale > 0 else None
    x, *_ = np.linalg.lstsq(A, b, rcond=rcond)
    return x


class LinearOperator:
    """Matrix-free square linear operator with optional transpose action."""

    def __init__(self, shape, matvec, rmatvec=None):
        self.shape = tuple(shape)
        self._matvec = matvec
        self._rmatvec = rmatvec

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.shape[1]:
            raise DimensionMismatch(f"operator expects length {self.shape[1]}")
        return self._matvec(x)

    def transpose_apply(self, y):
        if self._rmatvec is None:
            raise NotImplementedError("no transpose action available")
        return self._rmatvec(np.asarray(y, dtype=float))

    @classmethod
    def from_matrix(cls, A):
        A = np.asarray(A, dtype=float)
        return cls(A.shape, lambda x: A @ x, lambda y: A.T @ y)


def gmres(op, b, tol_rel=1e-10, max_iter=1000):
    """Non-restarted GMRES with classical Gram-Schmidt and one
    reorthogonalization pass (CGS2).

    Returns (x, iters, converged).  A breakdown (zero Arnoldi vector) means
    the current iterate is exact and is reported as converged.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if isinstance(op, np.ndarray):
        op = LinearOperator.from_matrix(op)
    beta = np.linalg.norm(b)
    if beta == 0.0:
        return np.zeros(n), 0, True

    max_iter = min(max_iter, n)
    V = np.zeros((max_iter + 1, n))
    H = np.zeros((max_iter + 1, max_iter))
    V[0] = b / beta
    # Givens rotations keep a running QR of H and the residual norm
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta

    converged = False
    k = 0
    for k in range(max_iter):
        w = op(V[k])
        h = V[: k + 1] @ w
        H[: k + 1, k] = h
        w -= V[: k + 1].T @ h
        corr = V[: k + 1] @ w  # one reorthogonalization pass
        H[: k + 1, k] += corr
        w -= V[: k + 1].T @ corr
        hnext = np.linalg.norm(w)
        H[k + 1, k] = hnext

        for i in range(k):
            t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
            H[i, k] = t
        denom = np.hypot(H[k, k], H[k + 1, k])
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
        H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]

        if hnext <= 1e-14 * beta:
            converged = True
            k += 1
            break
        V[k + 1] = w / hnext
        if abs(g[k + 1]) <= tol_rel * beta:
            converged = True
            k += 1
            break
    else:
        k = max_iter

    if k == 0:
        return np.zeros(n), 0, converged
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - H[i, i + 1 : k] @ y[i + 1 : k]) / H[i, i]
    x = V[:k].T @ y
    return x, k, converged


def sparse_direct_solve(A, b):
    """Direct sparse solve; raises SingularSystem on a singular pivot."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"A is {A.shape}, b has length {b.shape[0]}")
    try:
        x = spla.spsolve(A, b)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("singular matrix in sparse solve")
    return x


def solve_lp(costs, eq_matrix, eq_rhs, nonneg=True):
    """Solve min c^T lam  s.t.  E lam = r, lam >= 0.

    Returns (optimal value, vertex solution).  Raises LPInfeasible or
    LPUnbounded.
    """
    costs = np.asarray(costs, dtype=float)
    eq_matrix = np.asarray(eq_matrix, dtype=float)
    eq_rhs = np.asarray(eq_rhs, dtype=float)
    bounds = (0, None) if nonneg else (None, None)
    res = scipy.optimize.linprog(
        costs, A_eq=eq_matrix, b_eq=eq_rhs, bounds=bounds, method="highs"
    )
    if res.status == 2:
        raise LPInfeasible(res.message)
    if res.status == 3:
        raise LPUnbounded(res.message)
    if not res.success:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return res.fun, res.x


class ProxOracle:
    """Brute-force oracle for the proximal map of a polyhedral conjugate.

    Minimizes (1/2 gamma)|w - q|^2 + max_i(<u_i, w> - offset_i) by
    exhaustively checking the KKT system of every candidate active index
    subset (sizes 1..m+1 suffice by Caratheodory).  Exact up to linear-solve
    round-off; intended as an independent test oracle for |M| <= 20.
    """

    def __init__(self, points, offsets):
        self.points = np.asarray(points, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)
        if self.points.ndim != 2 or len(self.offsets) != len(self.points):
            raise DimensionMismatch("points/offsets mismatch")
        n, m = self.points.shape
        self.dim = m
        subsets = []
        for k in range(1, min(n, m + 1) + 1):
            subsets.extend(itertools.combinations(range(n), k))
        self._subsets = subsets
        self._blocks = {}

    def _blocks_for(self, gamma):
        """Affine solution blocks (w, lam) = P q + r per subset, cached per gamma."""
        blocks = self._blocks.get(gamma)
        if blocks is not None:
            return blocks
        m = self.dim
        blocks = []
        for idx in self._subsets:
            k = len(idx)
            U = self.points[list(idx)]
            off = self.offsets[list(idx)]
            # rows: k-1 tie equations, m resolvent equations, 1 sum-to-one
            nrow = (k - 1) + m + 1
            sysmat = np.zeros((nrow, m + k))
            rhs_const = np.zeros(nrow)
            rhs_q = np.zeros((nrow, m))
            for l in range(1, k):
                sysmat[l - 1, :m] = U[l] - U[0]
                rhs_const[l - 1] = off[l] - off[0]
            sysmat[k - 1 : k - 1 + m, :m] = np.eye(m)
            sysmat[k - 1 : k - 1 + m, m:] = gamma * U.T
            rhs_q[k - 1 : k - 1 + m] = np.eye(m)
            sysmat[-1, m:] = 1.0
            rhs_const[-1] = 1.0
            P, *_ = np.linalg.lstsq(sysmat, np.hstack([rhs_q, rhs_const[:, None]]), rcond=1e-12)
            blocks.append((idx, P[:, :m], P[:, m], sysmat, rhs_q, rhs_const))
        self._blocks[gamma] = blocks
        return blocks

    def prox(self, q, gamma, tol=1e-9):
        """Return (w, active index tuple)."""
        q = np.asarray(q, dtype=float)
        if q.shape[0] != self.dim:
            raise DimensionMismatch("query dimension mismatch")
        m = self.dim
        vals_at = lambda w: self.points @ w - self.offsets
        best = None
        best_obj = np.inf
        for idx, P, r, sysmat, rhs_q, rhs_const in self._blocks_for(gamma):
            x = P @ q + r
            w, lam = x[:m], x[m:]
            # reject if the (possibly inconsistent) system is not actually solved
            if np.max(np.abs(sysmat @ x - (rhs_q @ q + rhs_const))) > tol * (1 + np.abs(q).max()):
                continue
            if lam.min() < -tol or lam.max() > 1 + tol:
                continue
            vals = vals_at(w)
            active_val = vals[idx[0]]
            others = np.delete(vals, list(idx))
            if others.size and others.max() > active_val + tol:
                continue
            obj = 0.5 / gamma * np.dot(w - q, w - q) + vals.max()
            if obj < best_obj - 1e-15:
                best_obj = obj
                best = (w, idx)
            # strictly interior KKT point: unique optimum, stop searching
            if lam.min() > 1e-7 and (not others.size or others.max() < active_val - 1e-7):
                break
        if best is None:
            raise RuntimeError("prox oracle found no KKT point (should not happen)")
        return best


def prox_oracle_qp(points, q, gamma):
    """One-shot convenience wrapper around ProxOracle.

    `points` is a list of (u_i, offset_i) pairs; returns the prox point w.
    """
    us = [np.asarray(u, dtype=float) for u, _ in points]
    offs = [o for _, o in points]
    oracle = ProxOracle(np.array(us), np.array(offs))
    w, _ = oracle.prox(np.asarray(q, dtype=float), gamma)
    return w
