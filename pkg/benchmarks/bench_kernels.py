"""Compare the compiled and pure-Python filter kernels.

Times one forward pass plus RTS smoothing per backend on simulated records
and checks that both backends agree.  Run with ``python benchmarks/bench_kernels.py``.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from rrr_ekf import COMPILED_AVAILABLE, SimConfig, simulate_dataset
from rrr_ekf.ekf import ekf_forward, prepare_kernel, rts_smooth
from rrr_ekf.tuning import RecipeConfig, initial_statistics


def _pass(sim, backend):
    model, data = sim.model, sim.data
    kernel = prepare_kernel(model, data, backend)
    stats = initial_statistics(model, data, model.theta_init, RecipeConfig())
    x0 = sim.truth.states[0]
    t = time.perf_counter()
    traj = ekf_forward(model, data, model.theta_init, x0, stats.P0, stats.Q, stats.R,
                       kernel=kernel, open_loop=False)
    traj = rts_smooth(traj)
    return time.perf_counter() - t, traj


def run(cases=(1, 2, 3), N=2000, repeat=3):
    rows = []
    for case in cases:
        sim = simulate_dataset(SimConfig(case=case, N=N, seed=0))
        times = {}
        out = {}
        for backend in ("compiled", "python"):
            if backend == "compiled" and not COMPILED_AVAILABLE:
                continue
            best = np.inf
            reps = repeat if backend == "compiled" else 1
            for _ in range(reps):
                dt, traj = _pass(sim, backend)
                best = min(best, dt)
            times[backend], out[backend] = best, traj
        diff = np.nan
        if len(out) == 2:
            a, b = out["compiled"].x_smooth, out["python"].x_smooth
            diff = float(np.max(np.abs(a - b).max(axis=0) / np.abs(b).max(axis=0)))
        rows.append((case, times.get("compiled", np.nan), times["python"], diff))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    print(f"compiled kernel available: {COMPILED_AVAILABLE}")
    print(f"{'case':>4} {'compiled s':>11} {'python s':>9} {'speedup':>8} {'max rel diff':>13}")
    for case, tc, tp, diff in run(N=args.N, repeat=args.repeat):
        print(f"{case:>4} {tc:>11.3f} {tp:>9.3f} {tp / tc:>8.1f} {diff:>13.2e}")


if __name__ == "__main__":
    main()
