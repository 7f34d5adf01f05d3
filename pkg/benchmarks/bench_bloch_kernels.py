"""Benchmark the compiled Bloch kernels against the pure-Python fallback.

Run with:  python3 benchmarks/bench_bloch_kernels.py
"""
import time

import numpy as np

from multibang.models import _bloch_fallback as fallback
from multibang.models import bloch


def time_call(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    if not bloch.COMPILED_KERNELS:
        print("compiled kernels unavailable; benchmarking fallback only")
    rng = np.random.default_rng(0)
    n = 2000
    dt, s, omega = 1e-3, 2.6751, 4.0
    u = rng.normal(size=(n, 2))
    phi = rng.normal(size=(n, 2))
    m0 = np.array([0.0, 0.0, 1.0])
    target = np.array([1.0, 0.0, 0.0])

    rows = []
    Mf = fallback.crank_nicolson_state(u, omega, dt, s, m0)
    tf, _ = time_call(fallback.crank_nicolson_state, u, omega, dt, s, m0)
    rows.append(("state solve", tf, None, None))
    tfa, (Pf, gf) = time_call(fallback.adjoint_gradient, u, omega, dt, s,
                              Mf, target)
    rows.append(("adjoint gradient", tfa, None, None))
    tfl, dMf = time_call(fallback.linearized_state, u, phi, omega, dt, s, Mf)
    rows.append(("linearized state", tfl, None, None))

    if bloch.COMPILED_KERNELS:
        k = bloch._kernels
        tc, Mc = time_call(k.crank_nicolson_state, u, omega, dt, s, m0)
        assert np.abs(np.asarray(Mc) - Mf).max() < 1e-13
        rows[0] = ("state solve", tf, tc, tf / tc)
        tca, (Pc, gc) = time_call(k.adjoint_gradient, u, omega, dt, s,
                                  np.asarray(Mc), target)
        assert np.abs(np.asarray(gc) - gf).max() < 1e-13
        rows[1] = ("adjoint gradient", tfa, tca, tfa / tca)
        tcl, dMc = time_call(k.linearized_state, u, phi, omega, dt, s,
                             np.asarray(Mc))
        assert np.abs(np.asarray(dMc) - dMf).max() < 1e-13
        rows[2] = ("linearized state", tfl, tcl, tfl / tcl)

    print(f"{n} time steps, best of 5")
    print(f"{'kernel':<20}{'fallback':>12}{'compiled':>12}{'speedup':>10}")
    for name, a, b, r in rows:
        bs = f"{b * 1e3:9.2f} ms" if b is not None else "         --"
        rs = f"{r:9.1f}x" if r is not None else "        --"
        print(f"{name:<20}{a * 1e3:9.2f} ms{bs}{rs}")


if __name__ == "__main__":
    main()
