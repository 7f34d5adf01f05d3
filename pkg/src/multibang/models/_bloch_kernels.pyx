# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Crank-Nicolson sweeps for the Bloch equation.

Same contracts as _bloch_fallback; see that module for the derivation of
the closed-form step inverse.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline void _solve_E(double b1, double b2, double b3, double a,
                          double r1, double r2, double r3, double sign,
                          double* out) nogil:
    cdef double sa = sign * a
    cdef double c1 = sa * (b2 * r3 - b3 * r2)
    cdef double c2 = sa * (b3 * r1 - b1 * r3)
    cdef double c3 = sa * (b1 * r2 - b2 * r1)
    cdef double dot = b1 * r1 + b2 * r2 + b3 * r3
    cdef double den = 1.0 + a * a * (b1 * b1 + b2 * b2 + b3 * b3)
    out[0] = (r1 + c1 + a * a * b1 * dot) / den
    out[1] = (r2 + c2 + a * a * b2 * dot) / den
    out[2] = (r3 + c3 + a * a * b3 * dot) / den


def crank_nicolson_state(u, double omega, double dt, double s, M0):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t N = uv.shape[0]
    cdef cnp.ndarray[double, ndim=2] M = np.empty((N + 1, 3))
    cdef double[:, ::1] Mv = M
    cdef double a = 0.5 * dt
    cdef double x1, x2, x3, b1, b2, b3, r1, r2, r3
    cdef double out[3]
    cdef Py_ssize_t m
    Mv[0, 0] = M0[0]
    Mv[0, 1] = M0[1]
    Mv[0, 2] = M0[2]
    x1, x2, x3 = Mv[0, 0], Mv[0, 1], Mv[0, 2]
    for m in range(N):
        b1 = -s * uv[m, 0]
        b2 = -s * uv[m, 1]
        b3 = -omega
        r1 = x1 + a * (b2 * x3 - b3 * x2)
        r2 = x2 + a * (b3 * x1 - b1 * x3)
        r3 = x3 + a * (b1 * x2 - b2 * x1)
        _solve_E(b1, b2, b3, a, r1, r2, r3, 1.0, out)
        x1, x2, x3 = out[0], out[1], out[2]
        Mv[m + 1, 0] = x1
        Mv[m + 1, 1] = x2
        Mv[m + 1, 2] = x3
    return M


def adjoint_gradient(u, double omega, double dt, double s, M, Md):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t N = uv.shape[0]
    cdef cnp.ndarray[double, ndim=2] Phat = np.empty((N, 3))
    cdef cnp.ndarray[double, ndim=2] grad = np.empty((N, 2))
    cdef double[:, ::1] Pv = Phat
    cdef double[:, ::1] gv = grad
    cdef double a = 0.5 * dt
    cdef double q1, q2, q3, b1, b2, b3, w1, w2, w3
    cdef double p[3]
    cdef Py_ssize_t m
    q1 = Mv[N, 0] - Md[0]
    q2 = Mv[N, 1] - Md[1]
    q3 = Mv[N, 2] - Md[2]
    for m in range(N, 0, -1):
        b1 = -s * uv[m - 1, 0]
        b2 = -s * uv[m - 1, 1]
        b3 = -omega
        _solve_E(b1, b2, b3, a, q1, q2, q3, -1.0, p)
        Pv[m - 1, 0] = p[0]
        Pv[m - 1, 1] = p[1]
        Pv[m - 1, 2] = p[2]
        q1 = p[0] - a * (b2 * p[2] - b3 * p[1])
        q2 = p[1] - a * (b3 * p[0] - b1 * p[2])
        q3 = p[2] - a * (b1 * p[1] - b2 * p[0])
        w1 = Mv[m - 1, 0] + Mv[m, 0]
        w2 = Mv[m - 1, 1] + Mv[m, 1]
        w3 = Mv[m - 1, 2] + Mv[m, 2]
        gv[m - 1, 0] = a * s * (w3 * p[1] - w2 * p[2])
        gv[m - 1, 1] = a * s * (w1 * p[2] - w3 * p[0])
    return Phat, grad


def linearized_state(u, phi, double omega, double dt, double s, M):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] fv = np.ascontiguousarray(phi, dtype=np.float64)
    cdef double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t N = uv.shape[0]
    cdef cnp.ndarray[double, ndim=2] dM = np.zeros((N + 1, 3))
    cdef double[:, ::1] dv = dM
    cdef double a = 0.5 * dt
    cdef double x1 = 0.0, x2 = 0.0, x3 = 0.0
    cdef double b1, b2, b3, e1, e2, w1, w2, w3, r1, r2, r3
    cdef double out[3]
    cdef Py_ssize_t m
    for m in range(N):
        b1 = -s * uv[m, 0]
        b2 = -s * uv[m, 1]
        b3 = -omega
        e1 = -s * fv[m, 0]
        e2 = -s * fv[m, 1]
        w1 = Mv[m, 0] + Mv[m + 1, 0]
        w2 = Mv[m, 1] + Mv[m + 1, 1]
        w3 = Mv[m, 2] + Mv[m + 1, 2]
        r1 = x1 + a * (b2 * x3 - b3 * x2) + a * (e2 * w3)
        r2 = x2 + a * (b3 * x1 - b1 * x3) + a * (-e1 * w3)
        r3 = x3 + a * (b1 * x2 - b2 * x1) + a * (e1 * w2 - e2 * w1)
        _solve_E(b1, b2, b3, a, r1, r2, r3, 1.0, out)
        x1, x2, x3 = out[0], out[1], out[2]
        dv[m + 1, 0] = x1
        dv[m + 1, 1] = x2
        dv[m + 1, 2] = x3
    return dM


def hessian_pieces(u, phi, double omega, double dt, double s, M, dM, Phat):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] fv = np.ascontiguousarray(phi, dtype=np.float64)
    cdef double[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.float64)
    cdef double[:, ::1] dMv = np.ascontiguousarray(dM, dtype=np.float64)
    cdef double[:, ::1] Pv = np.ascontiguousarray(Phat, dtype=np.float64)
    cdef Py_ssize_t N = uv.shape[0]
    cdef cnp.ndarray[double, ndim=2] dgrad = np.empty((N, 2))
    cdef double[:, ::1] gv = dgrad
    cdef double a = 0.5 * dt
    cdef double q1, q2, q3, b1, b2, b3, e1, e2
    cdef double f1, f2, f3, w1, w2, w3, dw1, dw2, dw3, p1, p2, p3
    cdef double dp[3]
    cdef Py_ssize_t m
    q1 = dMv[N, 0]
    q2 = dMv[N, 1]
    q3 = dMv[N, 2]
    for m in range(N, 0, -1):
        b1 = -s * uv[m - 1, 0]
        b2 = -s * uv[m - 1, 1]
        b3 = -omega
        e1 = -s * fv[m - 1, 0]
        e2 = -s * fv[m - 1, 1]
        p1 = Pv[m - 1, 0]
        p2 = Pv[m - 1, 1]
        p3 = Pv[m - 1, 2]
        f1 = -(e2 * p3)
        f2 = e1 * p3
        f3 = e2 * p1 - e1 * p2
        _solve_E(b1, b2, b3, a, q1 + a * f1, q2 + a * f2, q3 + a * f3, -1.0, dp)
        q1 = dp[0] - a * (b2 * dp[2] - b3 * dp[1]) + a * f1
        q2 = dp[1] - a * (b3 * dp[0] - b1 * dp[2]) + a * f2
        q3 = dp[2] - a * (b1 * dp[1] - b2 * dp[0]) + a * f3
        w1 = Mv[m - 1, 0] + Mv[m, 0]
        w2 = Mv[m - 1, 1] + Mv[m, 1]
        w3 = Mv[m - 1, 2] + Mv[m, 2]
        dw1 = dMv[m - 1, 0] + dMv[m, 0]
        dw2 = dMv[m - 1, 1] + dMv[m, 1]
        dw3 = dMv[m - 1, 2] + dMv[m, 2]
        gv[m - 1, 0] = a * s * (dw3 * p2 - dw2 * p3 + w3 * dp[1] - w2 * dp[2])
        gv[m - 1, 1] = a * s * (dw1 * p3 - dw3 * p1 + w1 * dp[2] - w3 * dp[0])
    return dgrad
