"""Compiled kernels against their numpy fallbacks.

Times each hot kernel both ways in-process, then the full pipeline in two
subprocesses (``TILTWING_NUMBA=1`` and ``=0``), since the flag is read once
at import.

    python benchmarks/bench_kernels.py --repeats 5 --pipeline-n 400
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from tiltwing import validation
from tiltwing._jit import NUMBA_AVAILABLE
from tiltwing.conic import kernels
from tiltwing.path import discretise_path, generate_scenario_path
from tiltwing.speed import SpeedBounds, dynamics_coefficients
from tiltwing.vehicle import vahana


def median_time(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cone_inputs(rng, k=1500, q=3):
    s = rng.normal(size=(k, q))
    z = rng.normal(size=(k, q))
    s[:, 0] = np.linalg.norm(s[:, 1:], axis=1) + 0.5
    z[:, 0] = np.linalg.norm(z[:, 1:], axis=1) + 0.5
    return s, z


def dp_inputs():
    P = vahana()
    path = discretise_path(generate_scenario_path("backward_climb", 100.0, 10, 0.03))
    b = SpeedBounds.from_params(P, 20.0, 24.0)
    c, d = dynamics_coefficients(path.gamma_star[:10], path.gamma_star_prime, P)
    E_grid = np.linspace(0.0, 1600.0, 16001)
    a_grid = np.linspace(b.a_lo, b.a_hi, 401)
    ok = np.abs(E_grid - 576.0) <= 0.1
    return (E_grid, a_grid, path.delta, c, d, P.m, P.T_max, b.a_lo, b.a_hi, 1e-4, ok)


def rk4_inputs(n_steps=20000):
    P = vahana()
    t = np.linspace(0.0, 20.0, 201)
    T = np.full_like(t, 600.0)
    M = np.zeros_like(t)
    y0 = np.array([0.0, 0.0, 35.0, 0.0, 0.05, 0.0])
    return (t, T, M, y0, n_steps, 20.0 / n_steps, validation._param_vector(P))


def pipeline_time(N, flag):
    code = (
        "import time; from tiltwing.config import parse_config, build_problem;"
        "from tiltwing.pipeline import solve_transition;"
        f"cfg = parse_config('[scenario]\\nN = {N}\\n'); pr = build_problem(cfg);"
        "solve_transition(pr, cfg.vehicle, cfg.options);"  # warm-up (JIT compile)
        "t0 = time.perf_counter(); solve_transition(pr, cfg.vehicle, cfg.options);"
        "print(time.perf_counter() - t0)"
    )
    env = dict(os.environ, TILTWING_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--pipeline-n", type=int, default=400, help="0 skips the pipeline comparison")
    args = ap.parse_args(argv)
    if not NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy path exists")
        return 1

    rng = np.random.default_rng(0)
    s, z = cone_inputs(rng)
    d = rng.normal(size=s.shape)
    cases = [
        ("NT scaling (1500 cones)", kernels.nt_scaling_numba, kernels.nt_scaling_numpy, (s, z)),
        ("max step (1500 cones)", kernels.max_step_numba, kernels.max_step_numpy, (s, d)),
        ("grid oracle (N=10, 401 x 16001)", validation._dp_backward_numba,
         validation._dp_backward_numpy, dp_inputs()),
        ("RK4 (20000 steps)", validation._rk4_numba, validation._rk4_loop, rk4_inputs()),
    ]
    print(f"{'kernel':<34}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, fast, slow, inputs in cases:
        fast(*inputs)  # compile outside the timing
        reps = 1 if slow is validation._rk4_loop else args.repeats
        tf = median_time(fast, inputs, args.repeats)
        ts = median_time(slow, inputs, reps)
        print(f"{name:<34}{tf:>12.4g}{ts:>12.4g}{ts / tf:>9.1f}x")

    if args.pipeline_n:
        t_on = pipeline_time(args.pipeline_n, "1")
        t_off = pipeline_time(args.pipeline_n, "0")
        name = f"full pipeline (N={args.pipeline_n})"
        print(f"{name:<34}{t_on:>12.4g}{t_off:>12.4g}{t_off / t_on:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
