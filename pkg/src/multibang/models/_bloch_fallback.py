"""Pure-Python Crank-Nicolson sweeps for the Bloch equation.

Reference implementation of the time-stepping kernels; a compiled variant
with the same signatures lives in _bloch_kernels.  The magnetization obeys
dM/dt = B M with the skew matrix

    B = [[0, w, -s u2], [-w, 0, s u1], [s u2, -s u1, 0]],

equivalently B x = b cross x with b = -(s u1, s u2, w).  Each Crank-Nicolson
step solves (I - a B) M_m = (I + a B) M_{m-1}, a = dt/2, using the closed
form (I - a B)^{-1} = (I + a B + a^2 b b^T) / (1 + a^2 |b|^2).

All sweeps are discrete-exact companions of one another: the adjoint is the
transpose of the forward recursion, so gradients match difference quotients
of the discrete objective to machine precision.
"""

import numpy as np


def _apply_B(b1, b2, b3, x, sign=1.0):
    """sign * (b cross x) for the axial vector b."""
    return (
        sign * (b2 * x[2] - b3 * x[1]),
        sign * (b3 * x[0] - b1 * x[2]),
        sign * (b1 * x[1] - b2 * x[0]),
    )


def _solve_E(b1, b2, b3, a, r, transpose=False):
    """Solve (I - a B) x = r (or its transpose) via the closed form."""
    sign = -a if transpose else a
    c1, c2, c3 = _apply_B(b1, b2, b3, r, sign)
    dot = b1 * r[0] + b2 * r[1] + b3 * r[2]
    den = 1.0 + a * a * (b1 * b1 + b2 * b2 + b3 * b3)
    return (
        (r[0] + c1 + a * a * b1 * dot) / den,
        (r[1] + c2 + a * a * b2 * dot) / den,
        (r[2] + c3 + a * a * b3 * dot) / den,
    )


def crank_nicolson_state(u, omega, dt, s, M0):
    """Forward sweep; returns magnetization at all N+1 time points."""
    u = np.asarray(u, dtype=float)
    N = len(u)
    a = 0.5 * dt
    M = np.empty((N + 1, 3))
    M[0] = M0
    x = (float(M0[0]), float(M0[1]), float(M0[2]))
    for m in range(N):
        b1, b2, b3 = -s * u[m, 0], -s * u[m, 1], -omega
        g1, g2, g3 = _apply_B(b1, b2, b3, x, a)
        r = (x[0] + g1, x[1] + g2, x[2] + g3)
        x = _solve_E(b1, b2, b3, a, r)
        M[m + 1] = x
    return M


def adjoint_gradient(u, omega, dt, s, M, Md):
    """Backward sweep; returns (Phat, grad) with grad the exact derivative
    of 1/2 |M_N - Md|^2 with respect to each control component."""
    u = np.asarray(u, dtype=float)
    N = len(u)
    a = 0.5 * dt
    Phat = np.empty((N, 3))
    grad = np.empty((N, 2))
    q = (M[N, 0] - Md[0], M[N, 1] - Md[1], M[N, 2] - Md[2])
    for m in range(N, 0, -1):
        b1, b2, b3 = -s * u[m - 1, 0], -s * u[m - 1, 1], -omega
        p = _solve_E(b1, b2, b3, a, q, transpose=True)
        Phat[m - 1] = p
        # q_{m-1} = (I + a B)^T p = p - a (b cross p)
        c1, c2, c3 = _apply_B(b1, b2, b3, p, -a)
        q = (p[0] + c1, p[1] + c2, p[2] + c3)
        # grad component c: a s (M_{m-1} + M_m)^T B_c'^T p
        w = M[m - 1] + M[m]
        grad[m - 1, 0] = a * s * (w[2] * p[1] - w[1] * p[2])
        grad[m - 1, 1] = a * s * (w[0] * p[2] - w[2] * p[0])
    return Phat, grad


def linearized_state(u, phi, omega, dt, s, M):
    """Directional derivative of the state in control direction phi."""
    u = np.asarray(u, dtype=float)
    phi = np.asarray(phi, dtype=float)
    N = len(u)
    a = 0.5 * dt
    dM = np.zeros((N + 1, 3))
    x = (0.0, 0.0, 0.0)
    for m in range(N):
        b1, b2, b3 = -s * u[m, 0], -s * u[m, 1], -omega
        # e = -(s phi1, s phi2, 0) is the axial vector of the perturbation
        e1, e2 = -s * phi[m, 0], -s * phi[m, 1]
        g1, g2, g3 = _apply_B(b1, b2, b3, x, a)
        w = M[m] + M[m + 1]
        r = (
            x[0] + g1 + a * (e2 * w[2]),
            x[1] + g2 + a * (-e1 * w[2]),
            x[2] + g3 + a * (e1 * w[1] - e2 * w[0]),
        )
        x = _solve_E(b1, b2, b3, a, r)
        dM[m + 1] = x
    return dM


def hessian_pieces(u, phi, omega, dt, s, M, dM, Phat):
    """Directional derivative of the gradient in control direction phi."""
    u = np.asarray(u, dtype=float)
    phi = np.asarray(phi, dtype=float)
    N = len(u)
    a = 0.5 * dt
    dgrad = np.empty((N, 2))
    q = (dM[N, 0], dM[N, 1], dM[N, 2])
    for m in range(N, 0, -1):
        b1, b2, b3 = -s * u[m - 1, 0], -s * u[m - 1, 1], -omega
        e1, e2 = -s * phi[m - 1, 0], -s * phi[m - 1, 1]
        p = Phat[m - 1]
        # dB^T p = -(e cross p) with e = (e1, e2, 0)
        f = (-(e2 * p[2]), e1 * p[2], e2 * p[0] - e1 * p[1])
        r = (q[0] + a * f[0], q[1] + a * f[1], q[2] + a * f[2])
        dp = _solve_E(b1, b2, b3, a, r, transpose=True)
        c1, c2, c3 = _apply_B(b1, b2, b3, dp, -a)
        q = (dp[0] + c1 + a * f[0], dp[1] + c2 + a * f[1], dp[2] + c3 + a * f[2])
        w = M[m - 1] + M[m]
        dw = dM[m - 1] + dM[m]
        dgrad[m - 1, 0] = a * s * (
            dw[2] * p[1] - dw[1] * p[2] + w[2] * dp[1] - w[1] * dp[2]
        )
        dgrad[m - 1, 1] = a * s * (
            dw[0] * p[2] - dw[2] * p[0] + w[0] * dp[2] - w[2] * dp[0]
        )
    return dgrad
