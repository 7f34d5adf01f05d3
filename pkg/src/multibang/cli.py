"""Command-line front end.

Subcommands:
  run <config.json> [--out DIR]   run an experiment described by a config
  penalty-map <config.json>       export a dual-plane region classification
  verify                          run the built-in invariant checks

Configs are JSON with a "problem" field choosing the model; outputs are CSV
and JSON files in the output directory plus a manifest recording the config,
written files and timings.  The default output directory comes from the
MULTIBANG_OUT environment variable, falling back to ./multibang-out.
"""

import argparse
import json
import os
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__, solver
from .penalty import AdmissibleSet, ConcentricPenalty, CostSpec, PenaltyEngine, RadialPenalty
from .models import bloch, elasticity, transport

SCHEMA_VERSION = 1


def default_out_dir():
    return Path(os.environ.get("MULTIBANG_OUT", "multibang-out"))


def build_engine(cfg):
    """Penalty engine from a config block {kind, alpha, ...}."""
    kind = cfg.get("kind", "radial")
    alpha = cfg.get("alpha", 1.0)
    if kind == "radial":
        return RadialPenalty(cfg["thetas"], omega0=cfg.get("omega0", 1.0),
                             alpha=alpha)
    if kind == "concentric":
        return ConcentricPenalty(alpha=alpha)
    if kind == "general":
        cost = CostSpec(kind=cfg.get("cost", "quadratic"), alpha=alpha,
                        values=cfg.get("values"))
        return PenaltyEngine(AdmissibleSet(np.asarray(cfg["points"])), cost)
    raise ValueError(f"unknown penalty kind {kind!r}")


def solver_config(cfg):
    known = {f for f in solver.SolverConfig.__dataclass_fields__}
    extra = set(cfg) - known
    if extra:
        raise ValueError(f"unknown solver options: {sorted(extra)}")
    return solver.SolverConfig(**cfg)


class Manifest:
    def __init__(self, config, out_dir, seed=None):
        self.data = {
            "schema": SCHEMA_VERSION,
            "version": __version__,
            "config": config,
            "seed": seed,
            "outputs": [],
            "timings": {},
            "error": None,
        }
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_text(self, name, text):
        path = self.out_dir / name
        path.write_text(text)
        self.data["outputs"].append(name)
        return path

    def finish(self, error=None):
        if error is not None:
            self.data["error"] = error
        (self.out_dir / "manifest.json").write_text(
            json.dumps(self.data, indent=2, default=str)
        )


def run_bloch(cfg, manifest):
    problem = bloch.BlochProblem.from_config(cfg)
    engine = build_engine(cfg.get("penalty", {
        "kind": "radial", "thetas": [-np.pi, -np.pi / 3, np.pi / 3],
        "alpha": 0.1,
    }))

    class Model:
        def gradient(self, u):
            return bloch.gradient(problem, u)

        def hessian_action(self, u, phi):
            return bloch.hessian_action(problem, u, phi)

        def inner(self, u, v):
            return problem.inner(u, v)

    cfg_solver = solver_config(cfg.get("solver", {"gamma_min": 1e-5}))
    t0 = time.perf_counter()
    u0 = np.zeros((problem.n_intervals, 2))
    u, stats = solver.continuation(Model(), engine, cfg_solver, mode="fixed",
                                   u0=u0)
    manifest.data["timings"]["solve"] = time.perf_counter() - t0
    traj = bloch.solve_state(problem, u)
    manifest.write_text("control.csv", bloch.control_csv(problem, u))
    manifest.write_text("trajectory.csv", bloch.trajectory_csv(problem, traj))
    manifest.write_text("stats.csv", solver.stats_table_csv(stats))
    manifest.write_text("stats.json", solver.stats_table_json(stats))


def run_elasticity(cfg, manifest):
    problem = elasticity.ElasticityProblem(
        E=cfg.get("E", 20.0), nu=cfg.get("nu", 0.3),
        resolution=cfg.get("resolution", 129), alpha=cfg.get("alpha", 1e-3),
    )
    disc = elasticity.assemble(problem)
    engine = build_engine(cfg.get("penalty", {
        "kind": "concentric", "alpha": problem.alpha,
    }))
    target = cfg.get("target", {"kind": "rotation"})
    if target.get("kind", "rotation") == "rotation":
        z = elasticity.make_rotation_target(
            problem, disc, angle=target.get("angle", np.pi / 4)
        )
    else:
        z = elasticity.make_deadload_target(
            problem, disc, magnitude=target.get("magnitude", 1.0),
            noise=target.get("noise", 0.0), seed=cfg.get("seed", 0),
        )
    t0 = time.perf_counter()
    y, p, u, stats = elasticity.continuation(
        problem, disc, engine, z,
        gamma0=cfg.get("gamma0", 1e2), gamma_min=cfg.get("gamma_min", 1e-5),
    )
    manifest.data["timings"]["solve"] = time.perf_counter() - t0
    manifest.write_text("control.csv", elasticity.control_csv(disc, u))
    manifest.write_text("deformed.csv", elasticity.deformed_mesh_csv(disc, y))
    manifest.write_text("stats.json", json.dumps(stats, indent=2))


def run_transport(cfg, manifest):
    seed = cfg.get("seed", 0)
    net = transport.generate_network(
        cfg.get("grid_n", 10), jitter=cfg.get("jitter", 0.2), seed=seed,
        prune_factor=cfg.get("prune_factor", 2.0),
    )
    scale = cfg.get("scale")
    if scale is not None:
        net = transport.TransportNetwork(net.vertices * float(scale), net.edges)
    materials = cfg.get("materials", 3)
    amounts = cfg.get("amounts", [1.0] * materials)
    aset = transport.build_admissible_set(materials, amounts)
    engine = PenaltyEngine(aset, CostSpec("norm", alpha=cfg.get("alpha", 1e-3)))
    scenarios = [tuple(s) for s in cfg["scenarios"]]
    z = transport.make_source_sink_target(net, scenarios)
    model = transport.TransportModel(net, z)
    cfg_solver = solver_config(cfg.get("solver", {
        "gamma0": 20.0, "gmres_tol": 1e-11,
    }))
    t0 = time.perf_counter()
    u, stats = solver.continuation(
        model, engine, cfg_solver, mode=cfg.get("mode", "adaptive"),
        u0=np.zeros((net.n_edges, materials)),
    )
    manifest.data["timings"]["solve"] = time.perf_counter() - t0
    manifest.write_text("network.json", net.to_json())
    manifest.write_text("flux.csv", transport.flux_csv(net, u))
    manifest.write_text("stats.csv", solver.stats_table_csv(stats))
    manifest.write_text("stats.json", solver.stats_table_json(stats))


def run_penalty_map(cfg, manifest):
    engine = build_engine(cfg["penalty"])
    grid = cfg.get("grid", {})
    lo, hi = grid.get("lo", -0.4), grid.get("hi", 0.4)
    resolution = grid.get("resolution", 200)
    gamma = cfg.get("gamma", 1e-3)
    manifest.write_text(
        "regions.csv", engine.region_grid_csv(lo, hi, resolution, gamma)
    )


RUNNERS = {
    "bloch": run_bloch,
    "elasticity": run_elasticity,
    "transport": run_transport,
    "penalty-map": run_penalty_map,
}


def verify_suite():
    """Invariant spot checks; returns a report dict."""
    report = {}
    rng = np.random.default_rng(0)

    rad = RadialPenalty([-np.pi, -np.pi / 3, np.pi / 3], alpha=0.1)
    eng = PenaltyEngine(AdmissibleSet(rad.points), CostSpec("quadratic", alpha=0.1))
    Q = rng.normal(scale=2.0, size=(200, 2))
    dev = 0.0
    for gamma in (1.0, 1e-2):
        dev = max(dev, float(np.abs(
            rad.yosida(Q, gamma) - eng.yosida(Q, gamma)
        ).max()))
    report["radial_vs_engine"] = {"max_deviation": dev, "pass": dev <= 1e-10}

    con = ConcentricPenalty(alpha=0.3)
    dev = 0.0
    for gamma in (1.0, 1e-2):
        W = con.prox(Q, gamma)
        dev = max(dev, float(np.abs(
            W + gamma * con.yosida(Q, gamma) - Q
        ).max()))
    report["resolvent_identity"] = {"max_deviation": dev, "pass": dev <= 1e-14}

    prob = bloch.BlochProblem(n_intervals=100)
    u = rng.normal(size=(100, 2))
    traj = bloch.solve_state(prob, u)
    dev = float(np.abs(
        np.linalg.norm(traj.magnetizations[0], axis=1) - 1.0
    ).max())
    report["bloch_norm_preservation"] = {"max_deviation": dev, "pass": dev <= 1e-12}

    net = transport.generate_network(5, jitter=0.2, seed=1)
    uu = rng.normal(size=(net.n_edges, 2))
    zz = rng.normal(size=(net.n_vertices, 2))
    lhs = float(np.sum(transport.divergence(net, uu) * zz))
    rhs = net.edge_inner(uu, transport.divergence_adjoint(net, zz))
    dev = abs(lhs - rhs)
    report["transport_adjoint_identity"] = {"max_deviation": dev,
                                            "pass": dev <= 1e-12}

    report["all_pass"] = all(
        v["pass"] for v in report.values() if isinstance(v, dict)
    )
    return report


def main(argv=None):
    parser = argparse.ArgumentParser(prog="multibang")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_map = sub.add_parser("penalty-map", help="export dual-plane regions")
    p_map.add_argument("config")
    p_map.add_argument("--out", default=None)
    sub.add_parser("verify", help="run built-in invariant checks")
    args = parser.parse_args(argv)

    if args.command == "verify":
        report = verify_suite()
        print(json.dumps(report, indent=2))
        return 0 if report["all_pass"] else 1

    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else default_out_dir()
    manifest = Manifest(cfg, out_dir, seed=cfg.get("seed"))
    kind = "penalty-map" if args.command == "penalty-map" else cfg.get("problem")
    runner = RUNNERS.get(kind)
    if runner is None:
        manifest.finish(error=f"unknown problem kind {kind!r}")
        print(f"error: unknown problem kind {kind!r}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        runner(cfg, manifest)
    except Exception:
        manifest.data["timings"]["total"] = time.perf_counter() - t0
        manifest.finish(error=traceback.format_exc())
        print("error: run failed; see manifest.json", file=sys.stderr)
        return 1
    manifest.data["timings"]["total"] = time.perf_counter() - t0
    manifest.finish()
    print(f"wrote {len(manifest.data['outputs'])} files to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
