#!/usr/bin/env python3
"""Compare the numba and numpy kernel backends.

Times each hot kernel on both backends plus one end-to-end Monte Carlo
run per backend (in a subprocess, since the backend is fixed at import).
Prints a table, or JSON with --json.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from logbilinear.design import DesignSpec, build_model_matrices
from logbilinear.kernels import numba_kernels, numpy_kernels

REPEATS = 5


def best_of(fn, repeats=REPEATS):
    fn()  # warm-up (and JIT compile for numba)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(size, inner):
    rng = np.random.default_rng(0)
    table = rng.uniform(0.5, 5.0, size=(size, size))
    row = rng.dirichlet(np.ones(size))
    col = rng.dirichlet(np.ones(size))
    mu = rng.uniform(1.0, 50.0, size=(size, size))
    mm = build_model_matrices(DesignSpec.linear_by_linear(size - 1, size - 1))
    h = np.array(mm.Hbasis)
    r = rng.poisson(30, size=mm.I).astype(float) + 1.0
    beta0 = np.linalg.lstsq(h, np.log(r + 0.5), rcond=None)[0]

    def make(mod):
        return {
            "ipf_sweep": lambda: [mod.ipf_sweep(table.copy(), row, col) for _ in range(inner)],
            "newton_poisson": lambda: [mod.newton_poisson(h, r, beta0, 1e-10 * r.sum(), 1e-10, 100, 10) for _ in range(inner)],
            "ctdc": lambda: [mod.ctdc(mu) for _ in range(inner)],
            "mr_covariance": lambda: [mod.mr_covariance(mu) for _ in range(inner)],
        }

    return make(numpy_kernels), make(numba_kernels)


MC_SNIPPET = """
import time, numpy as np
from logbilinear import DesignSpec, SchemeSpec, SimulationConfig, build_model_matrices, monte_carlo_cov
mm = build_model_matrices(DesignSpec.linear_by_linear(3, 3))
p = np.full((4, 4), 1 / 16)
cfg = SimulationConfig(p, SchemeSpec.multinomial(500), {reps}, seed=1)
monte_carlo_cov(SimulationConfig(p, SchemeSpec.multinomial(500), 5), mm)
t0 = time.perf_counter()
monte_carlo_cov(cfg, mm)
print(time.perf_counter() - t0)
"""


def monte_carlo_time(backend, reps):
    env = {**os.environ, "LOGBILINEAR_BACKEND": backend}
    out = subprocess.run([sys.executable, "-c", MC_SNIPPET.format(reps=reps)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=6, help="table is size x size")
    parser.add_argument("--inner", type=int, default=200, help="kernel calls per timing")
    parser.add_argument("--reps", type=int, default=2000, help="Monte Carlo replicates")
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)

    if numba_kernels is None:
        sys.exit("numba is not importable; nothing to compare")
    np_cases, nb_cases = kernel_cases(args.size, args.inner)
    rows = []
    for name in np_cases:
        t_np = best_of(np_cases[name]) / args.inner
        t_nb = best_of(nb_cases[name]) / args.inner
        rows.append({"kernel": name, "numpy_us": t_np * 1e6, "numba_us": t_nb * 1e6, "speedup": t_np / t_nb})
    mc_np = monte_carlo_time("numpy", args.reps)
    mc_nb = monte_carlo_time("numba", args.reps)
    rows.append({"kernel": f"monte_carlo_cov x{args.reps}", "numpy_us": mc_np * 1e6, "numba_us": mc_nb * 1e6,
                 "speedup": mc_np / mc_nb})

    if args.json:
        print(json.dumps({"size": args.size, "results": rows}, indent=2))
        return
    print(f"{'kernel':<26}{'numpy (us)':>14}{'numba (us)':>14}{'speedup':>10}")
    for row in rows:
        print(f"{row['kernel']:<26}{row['numpy_us']:>14.1f}{row['numba_us']:>14.1f}{row['speedup']:>10.2f}")


if __name__ == "__main__":
    main()
