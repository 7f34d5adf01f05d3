"""Reduced semismooth Newton solver with Moreau-Yosida continuation.

Works on any model exposing gradient(u) -> p = -F'(u) and
hessian_action(u, phi) -> F''(u) phi as node arrays of shape (n, m), plus
inner(u, v) for the control inner product.  The regularized optimality
condition is the fixed-point equation

    R(u) = u - H_gamma(-F'(u)) = 0,

solved by a semismooth Newton iteration whose linearization
(Id + D_N H_gamma(p) F''(u)) is applied matrix-free inside GMRES, with a
monotone backtracking line search on the residual norm.  Two outer loops
drive gamma to zero: a fixed-factor schedule and the adaptive
reduction-factor path-following used for the transport runs.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import numerics


@dataclass
class SolverConfig:
    abs_tol: float = 1e-7
    rel_tol: float = 1e-7
    max_ssn: int = 500
    gmres_tol: float = 1e-10
    gmres_max: int = 1000
    gamma0: float = 1e2
    gamma_min: float = 1e-10
    reduction: float = 0.5
    ls_factor: float = 0.5
    tau_min: float = 1e-5
    mb_tol: float = 1e-3
    # adaptive path-following (branched transport)
    adaptive_q0: float = 0.5
    adaptive_max_ssn: int = 20
    adaptive_abs_cap: float = 1e-6
    adaptive_rel_tol: float = 1e-9
    adaptive_gamma_end: float = 1e-7

    def __post_init__(self):
        if not 0 < self.reduction < 1:
            raise ValueError("reduction factor must be in (0, 1)")
        for name in ("abs_tol", "rel_tol", "gmres_tol", "tau_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class IterationStats:
    gamma: float
    ssn_iterations: int
    mean_gmres: float
    line_search_steps: int
    not_multibang: int
    residual: float = 0.0
    converged: bool = True


@dataclass
class SsnResult:
    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list)
    gmres_iterations: list = field(default_factory=list)
    line_search_steps: int = 0

    @property
    def mean_gmres(self):
        if not self.gmres_iterations:
            return 0.0
        return float(np.mean(self.gmres_iterations))


class IdentityModel:
    """Quadratic test problem F(u) = 1/2 |u - z|^2 with S = Id and unit
    node weights; handy for exercising the solver machinery in isolation."""

    def __init__(self, z):
        self.z = np.asarray(z, dtype=float)

    def gradient(self, u):
        return self.z - u

    def hessian_action(self, u, phi):
        return np.asarray(phi, dtype=float)

    def inner(self, u, v):
        return float(np.sum(np.asarray(u) * np.asarray(v)))


def reduced_residual(model, engine, u, gamma):
    """R(u) = u - H_gamma(-F'(u)); returns (R, p) with p the adjoint field."""
    p = model.gradient(u)
    return u - engine.yosida(p, gamma), p


def not_multibang_count(engine, u, tol=1e-3):
    """Number of nodes farther than tol from every admissible value."""
    u = np.asarray(u, dtype=float)
    d2 = np.sum((u[:, None, :] - engine.points[None, :, :]) ** 2, axis=2)
    return int(np.sum(np.sqrt(d2.min(axis=1)) > tol))


def ssn_solve(model, engine, u0, gamma, config, abs_tol=None, rel_tol=None,
              max_ssn=None):
    """Semismooth Newton iteration at fixed gamma; returns (u, SsnResult)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    abs_tol = config.abs_tol if abs_tol is None else abs_tol
    rel_tol = config.rel_tol if rel_tol is None else rel_tol
    max_ssn = config.max_ssn if max_ssn is None else max_ssn

    u = np.array(u0, dtype=float)
    n, m = u.shape
    result = SsnResult(converged=False, iterations=0)

    def rnorm(r):
        return np.sqrt(model.inner(r, r))

    R, p = reduced_residual(model, engine, u, gamma)
    res = rnorm(R)
    result.residual_history.append(res)
    tol = max(abs_tol, rel_tol * res)

    for k in range(max_ssn):
        if res <= tol:
            result.converged = True
            return u, result

        DN = engine.newton_deriv(p, gamma)

        # rows with a vanishing Newton-derivative block reduce to
        # delta_i = -R_i; the Krylov solve only spans the active rows
        active = np.abs(DN).max(axis=(1, 2)) > 0.0
        if active.all():

            def matvec(v):
                phi = v.reshape(n, m)
                hphi = model.hessian_action(u, phi)
                return (phi + np.einsum("nij,nj->ni", DN, hphi)).ravel()

            op = numerics.LinearOperator((n * m, n * m), matvec)
            delta, gits, _ = numerics.gmres(
                op, -R.ravel(), tol_rel=config.gmres_tol,
                max_iter=config.gmres_max,
            )
            delta = delta.reshape(n, m)
        elif not active.any():
            delta = -R
            gits = 0
        else:
            na = int(active.sum())
            DNa = DN[active]
            delta = np.zeros_like(u)
            delta[~active] = -R[~active]

            def matvec(v):
                phi = np.zeros((n, m))
                phi[active] = v.reshape(na, m)
                hphi = model.hessian_action(u, phi)
                out = phi[active] + np.einsum(
                    "nij,nj->ni", DNa, hphi[active]
                )
                return out.ravel()

            coupling = model.hessian_action(u, delta)
            rhs = -R[active] - np.einsum("nij,nj->ni", DNa, coupling[active])
            op = numerics.LinearOperator((na * m, na * m), matvec)
            sol, gits, _ = numerics.gmres(
                op, rhs.ravel(), tol_rel=config.gmres_tol,
                max_iter=config.gmres_max,
            )
            delta[active] = sol.reshape(na, m)
        result.gmres_iterations.append(gits)

        # backtracking on the residual norm; a full step is taken whenever
        # it reduces the residual, otherwise the best improving step from
        # the backtracking sequence is used
        tau = 1.0
        best = None
        while tau >= config.tau_min:
            trial = u + tau * delta
            R_t, p_t = reduced_residual(model, engine, trial, gamma)
            res_t = rnorm(R_t)
            if res_t < res:
                if tau == 1.0:
                    best = (trial, R_t, p_t, res_t)
                    break
                if best is None or res_t < best[3]:
                    best = (trial, R_t, p_t, res_t)
            elif best is not None:
                break
            tau *= config.ls_factor
            result.line_search_steps += 1
        if best is None:
            result.iterations = k + 1
            return u, result

        u, R, p, res = best
        result.iterations = k + 1
        result.residual_history.append(res)

    result.converged = res <= tol
    return u, result


def continuation(model, engine, config, mode="fixed", u0=None, callback=None):
    """Drive gamma toward zero, warm-starting each solve.

    Fixed mode halves gamma (config.reduction) until gamma_min or a failed
    solve, returning the last converged iterate.  Adaptive mode adjusts the
    reduction factor q from the Newton step counts: a failed solve is
    discarded and retried from the previous iterate with q^(1/4); fast
    convergence sharpens q; the path ends at gamma < adaptive_gamma_end.
    """
    if mode not in ("fixed", "adaptive"):
        raise ValueError(f"unknown continuation mode {mode!r}")
    if u0 is None:
        raise ValueError("initial control required")
    u = np.array(u0, dtype=float)
    stats = []

    if mode == "fixed":
        gamma = config.gamma0
        while gamma >= config.gamma_min:
            u_new, res = ssn_solve(model, engine, u, gamma, config)
            record = IterationStats(
                gamma=gamma,
                ssn_iterations=res.iterations,
                mean_gmres=res.mean_gmres,
                line_search_steps=res.line_search_steps,
                not_multibang=not_multibang_count(engine, u_new, config.mb_tol),
                residual=res.residual_history[-1],
                converged=res.converged,
            )
            if not res.converged:
                record.not_multibang = not_multibang_count(engine, u, config.mb_tol)
                stats.append(record)
                return u, stats
            u = u_new
            stats.append(record)
            if callback is not None:
                callback(gamma, u, res)
            gamma *= config.reduction
        return u, stats

    q = config.adaptive_q0
    gamma = config.gamma0
    prev_gamma = None  # gamma of the last accepted solve
    while gamma >= config.adaptive_gamma_end and len(stats) < 3000:
        u_new, res = ssn_solve(
            model, engine, u, gamma, config,
            abs_tol=min(gamma, config.adaptive_abs_cap),
            rel_tol=config.adaptive_rel_tol,
            max_ssn=config.adaptive_max_ssn,
        )
        if not res.converged:
            # discard the iterate, soften the reduction, retry from the
            # previous accepted control
            stats.append(IterationStats(
                gamma=gamma, ssn_iterations=res.iterations,
                mean_gmres=res.mean_gmres,
                line_search_steps=res.line_search_steps,
                not_multibang=not_multibang_count(engine, u, config.mb_tol),
                residual=res.residual_history[-1], converged=False,
            ))
            if prev_gamma is None:
                return u, stats
            q = q ** 0.25
            gamma = prev_gamma * q
            continue
        u = u_new
        prev_gamma = gamma
        stats.append(IterationStats(
            gamma=gamma, ssn_iterations=res.iterations,
            mean_gmres=res.mean_gmres,
            line_search_steps=res.line_search_steps,
            not_multibang=not_multibang_count(engine, u, config.mb_tol),
            residual=res.residual_history[-1], converged=True,
        ))
        if callback is not None:
            callback(gamma, u, res)
        if res.iterations <= 5:
            q = min(1 - 1e-3, max(q ** 1.25, 0.5))
        elif res.iterations <= 15:
            q = min(q ** 0.75, 1 - 1e-4)
        else:
            q = min(1 - 1e-3, q)
        gamma *= q
    return u, stats


def stats_table_csv(stats):
    """CSV export with the iteration-table columns."""
    buf = io.StringIO()
    wr = csv.writer(buf)
    wr.writerow(["gamma", "ssn", "avg_gmres", "line_search", "not_mb"])
    for s in stats:
        wr.writerow([s.gamma, s.ssn_iterations, s.mean_gmres,
                     s.line_search_steps, s.not_multibang])
    return buf.getvalue()


def stats_table_json(stats):
    return json.dumps([
        {
            "gamma": s.gamma,
            "ssn": s.ssn_iterations,
            "avg_gmres": s.mean_gmres,
            "line_search": s.line_search_steps,
            "not_mb": s.not_multibang,
            "residual": s.residual,
            "converged": s.converged,
        }
        for s in stats
    ], indent=2)


def load_stats_json(text):
    return [
        IterationStats(
            gamma=d["gamma"], ssn_iterations=d["ssn"], mean_gmres=d["avg_gmres"],
            line_search_steps=d["line_search"], not_multibang=d["not_mb"],
            residual=d.get("residual", 0.0), converged=d.get("converged", True),
        )
        for d in json.loads(text)
    ]
