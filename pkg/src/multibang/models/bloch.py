"""Bloch-equation pulse design model.

Tracks the magnetization of one or more isochromats under a two-component
radio-frequency control and exposes the reduced objective

    F(u) = 1/2 sum_j |M^(omega_j)(T) - M_dj|^2

with its exact discrete gradient and Hessian action.  The adjoint and
linearized schemes are the algebraic transpose and tangent of the
Crank-Nicolson forward recursion, so all derivative identities hold to
machine precision, not just to discretization order.

Time stepping is delegated to a compiled kernel module when available, with
a pure-Python fallback carrying identical signatures.
"""

import numpy as np

try:
    from . import _bloch_kernels as _kernels

    COMPILED_KERNELS = True
except ImportError:
    from . import _bloch_fallback as _kernels

    COMPILED_KERNELS = False

GYROMAGNETIC_RATIO = 267.51


class BlochProblem:
    """Pulse design setting: horizon, step count, isochromat offsets and
    per-isochromat target magnetizations."""

    def __init__(self, T=1.0, n_intervals=1000, offsets=(0.0,),
                 targets=((1.0, 0.0, 0.0),), gyro=GYROMAGNETIC_RATIO, b1=1e-2):
        if n_intervals < 1:
            raise ValueError("need at least one time interval")
        self.T = float(T)
        self.n_intervals = int(n_intervals)
        self.offsets = np.asarray(offsets, dtype=float)
        self.targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if len(self.targets) != len(self.offsets):
            raise ValueError("one target per offset frequency required")
        self.scale = float(gyro) * float(b1)
        self.m0 = np.array([0.0, 0.0, 1.0])

    @property
    def dt(self):
        return self.T / self.n_intervals

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.n_intervals + 1)

    def inner(self, u, v):
        """Discrete L2 inner product of two controls."""
        return self.dt * float(np.sum(np.asarray(u) * np.asarray(v)))

    @classmethod
    def from_config(cls, cfg):
        return cls(
            T=cfg.get("T", 1.0),
            n_intervals=cfg.get("N_u", 1000),
            offsets=cfg.get("offsets", [0.0]),
            targets=cfg.get("targets", [[1.0, 0.0, 0.0]]),
            gyro=cfg.get("gyro", GYROMAGNETIC_RATIO),
            b1=cfg.get("b1", 1e-2),
        )


class Trajectory:
    """Nodal magnetization per isochromat, plus the interval-constant
    adjoint once a gradient has been computed."""

    def __init__(self, times, magnetizations, adjoints=None):
        self.times = times
        self.magnetizations = magnetizations
        self.adjoints = adjoints

    def terminal(self, j=0):
        return self.magnetizations[j][-1]


def _check_control(problem, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (problem.n_intervals, 2):
        raise ValueError(f"control must have shape ({problem.n_intervals}, 2)")
    return u


def solve_state(problem, u):
    """Crank-Nicolson forward solve for every isochromat."""
    u = _check_control(problem, u)
    mags = [
        _kernels.crank_nicolson_state(u, w, problem.dt, problem.scale, problem.m0)
        for w in problem.offsets
    ]
    return Trajectory(problem.times, mags)


def objective(problem, u, trajectory=None):
    """1/2 sum_j |M_j(T) - M_dj|^2."""
    if trajectory is None:
        trajectory = solve_state(problem, u)
    return 0.5 * sum(
        float(np.sum((trajectory.terminal(j) - problem.targets[j]) ** 2))
        for j in range(len(problem.offsets))
    )


def gradient(problem, u, trajectory=None):
    """Adjoint field p = -F'(u) as an L2 control representative."""
    u = _check_control(problem, u)
    if trajectory is None:
        trajectory = solve_state(problem, u)
    total = np.zeros_like(u)
    adjoints = []
    for j, w in enumerate(problem.offsets):
        Phat, g = _kernels.adjoint_gradient(
            u, w, problem.dt, problem.scale,
            trajectory.magnetizations[j], problem.targets[j],
        )
        adjoints.append(Phat)
        total += g
    trajectory.adjoints = adjoints
    return -total / problem.dt


def solve_linearized_state(problem, u, phi, trajectory=None):
    """Directional state derivatives per isochromat."""
    u = _check_control(problem, u)
    phi = np.asarray(phi, dtype=float)
    if trajectory is None:
        trajectory = solve_state(problem, u)
    return [
        _kernels.linearized_state(
            u, phi, w, problem.dt, problem.scale, trajectory.magnetizations[j]
        )
        for j, w in enumerate(problem.offsets)
    ]


def hessian_action(problem, u, phi, trajectory=None):
    """Exact discrete F''(u) phi in L2 control representation."""
    u = _check_control(problem, u)
    phi = np.asarray(phi, dtype=float)
    if trajectory is None:
        trajectory = solve_state(problem, u)
    if trajectory.adjoints is None:
        gradient(problem, u, trajectory)
    total = np.zeros_like(u)
    for j, w in enumerate(problem.offsets):
        dM = _kernels.linearized_state(
            u, phi, w, problem.dt, problem.scale, trajectory.magnetizations[j]
        )
        total += _kernels.hessian_pieces(
            u, phi, w, problem.dt, problem.scale,
            trajectory.magnetizations[j], dM, trajectory.adjoints[j],
        )
    return total / problem.dt


def control_csv(problem, u):
    """CSV rows (t, u1, u2); the control is constant on (t_{m-1}, t_m]."""
    u = _check_control(problem, u)
    lines = ["t,u1,u2"]
    for m in range(problem.n_intervals):
        lines.append(f"{problem.times[m + 1]},{u[m, 0]},{u[m, 1]}")
    return "\n".join(lines) + "\n"


def trajectory_csv(problem, trajectory):
    """CSV rows (t, offset, M1, M2, M3) for all isochromats."""
    lines = ["t,offset,M1,M2,M3"]
    for j, w in enumerate(problem.offsets):
        M = trajectory.magnetizations[j]
        for m, t in enumerate(trajectory.times):
            lines.append(f"{t},{w},{M[m, 0]},{M[m, 1]},{M[m, 2]}")
    return "\n".join(lines) + "\n"
