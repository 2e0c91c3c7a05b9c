"""Command-line entry points.

::

    tiltwing solve --config run.ini --out results/
    tiltwing benchmark --config run.ini --sizes 100,200,400 --repeats 3
    tiltwing validate --traj results/trajectory.csv --config run.ini
    tiltwing oracle --config run.ini --n 8

Log verbosity is taken from ``TILTWING_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import logging
import os
import platform
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import USE_NUMBA
from .config import ConfigError, RunConfig, build_problem, config_to_text, load_config
from .io import read_trajectory_csv, write_report, write_simtrace_csv, write_trajectory_csv
from .pipeline import TimeTrajectory, TransitionInfeasible, solve_speed, solve_transition
from .validation import (
    OracleGrid,
    SimulationError,
    dp_speed_oracle,
    residual_audit,
    simulate_time_domain,
)

log = logging.getLogger("tiltwing")

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3
EXIT_CONFIG = 4

LOG_ENV = "TILTWING_LOG_LEVEL"


def _manifest_text(cfg: RunConfig, run: dict) -> str:
    lines = [config_to_text(cfg), "[run]"]
    lines += [f"{k} = {v}" for k, v in run.items()]
    return "\n".join(lines) + "\n"


def _environment() -> dict:
    return {
        "package_version": __version__,
        "numba_kernels": USE_NUMBA,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def audit_with_simulation(traj: TimeTrajectory, cfg: RunConfig):
    """Residual audit plus closed-loop simulation; a failed simulation is
    recorded in the report instead of raising."""
    try:
        trace = simulate_time_domain(traj, cfg.vehicle)
    except SimulationError as exc:
        log.warning("simulation stopped: %s", exc)
        report = residual_audit(traj, cfg.vehicle)
        report.extras["simulation_error"] = str(exc)
        return report, None
    return residual_audit(traj, cfg.vehicle, trace), trace


def run_solve(config_path, out_dir) -> int:
    """Solve the configured scenario and write results into ``out_dir``."""
    try:
        cfg = load_config(config_path)
        problem = build_problem(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = _environment()
    t0 = time.perf_counter()
    try:
        traj = solve_transition(problem, cfg.vehicle, cfg.options)
    except TransitionInfeasible as exc:
        log.error("%s", exc)
        run.update(status="infeasible", stage=exc.stage, iteration=exc.iteration,
                   solver_status=exc.status.value)
        (out / "manifest.ini").write_text(_manifest_text(cfg, run), encoding="utf-8")
        return EXIT_INFEASIBLE
    wall = time.perf_counter() - t0

    write_trajectory_csv(traj, out / "trajectory.csv")
    report, trace = audit_with_simulation(traj, cfg)
    write_report(report, out / "report.txt")
    if trace is not None:
        write_simtrace_csv(trace, out / "simtrace.csv")
    run.update(
        status="converged" if traj.converged else "not_converged",
        iterations_used=traj.iterations_used,
        objective_history=",".join(repr(float(v)) for v in traj.objective_history),
        speed_objective=repr(float(traj.speed_objective)),
        wall_time_s=f"{wall:.3f}",
    )
    (out / "manifest.ini").write_text(_manifest_text(cfg, run), encoding="utf-8")
    log.info("wrote results to %s (%s)", out, run["status"])
    return EXIT_OK if traj.converged else EXIT_NOT_CONVERGED


@dataclass
class BenchmarkRow:
    N: int
    times: list = field(default_factory=list)
    error: str | None = None

    @property
    def median(self) -> float:
        return statistics.median(self.times) if self.times else float("nan")


@dataclass
class BenchmarkResult:
    rows: list
    exponent: float | None

    def to_text(self) -> str:
        lines = ["N,median_s,repeats,error"]
        for r in self.rows:
            lines.append(f"{r.N},{r.median:.6g},{len(r.times)},{r.error or ''}")
        if self.exponent is not None:
            lines.append(f"# fitted exponent: {self.exponent:.3f}")
        return "\n".join(lines) + "\n"


def fit_power_law(sizes, times) -> float | None:
    """Least-squares slope of ``log(time)`` against ``log(N)``."""
    sizes = np.asarray(sizes, dtype=float)
    times = np.asarray(times, dtype=float)
    ok = np.isfinite(times) & (times > 0)
    if np.count_nonzero(ok) < 2:
        return None
    return float(np.polyfit(np.log(sizes[ok]), np.log(times[ok]), 1)[0])


def run_benchmark(cfg: RunConfig, sizes, repeats: int = 1, solver=solve_transition) -> BenchmarkResult:
    """Median wall time of the full pipeline at each N; a failing size is
    recorded and the remaining sizes still run."""
    sizes = list(sizes)
    if not sizes:
        raise ValueError("sizes must be nonempty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    for N in sizes:
        row = BenchmarkRow(int(N))
        for _ in range(repeats):
            try:
                c = cfg.with_N(int(N))
                problem = build_problem(c)
                t0 = time.perf_counter()
                solver(problem, c.vehicle, c.options)
                row.times.append(time.perf_counter() - t0)
            except (TransitionInfeasible, ConfigError, ValueError) as exc:
                row.error = str(exc)
                break
        log.info("benchmark N=%d: median %.3g s", row.N, row.median)
        rows.append(row)
    good = [r for r in rows if r.error is None]
    exponent = fit_power_law([r.N for r in good], [r.median for r in good])
    return BenchmarkResult(rows, exponent)


def run_validate(traj_path, config_path, out_dir=None) -> int:
    try:
        cfg = load_config(config_path)
        traj = read_trajectory_csv(traj_path)
    except (ConfigError, OSError, ValueError) as exc:
        log.error("input error: %s", exc)
        return EXIT_CONFIG
    report, trace = audit_with_simulation(traj, cfg)
    sys.stdout.write(report.to_text())
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(report, out / "report.txt")
        if trace is not None:
            write_simtrace_csv(trace, out / "simtrace.csv")
    return EXIT_OK


def run_oracle(config_path, n: int, grid: OracleGrid | None = None) -> int:
    """Compare the convex speed program with the grid oracle at small N."""
    try:
        cfg = load_config(config_path).with_N(n)
        problem = build_problem(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    try:
        convex = solve_speed(problem.path, cfg.vehicle, problem.speed_bounds, cfg.options)
    except TransitionInfeasible as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    try:
        dp = dp_speed_oracle(problem.path, cfg.vehicle, problem.speed_bounds, grid, cfg.options.E_floor)
    except ValueError as exc:
        log.error("oracle: %s", exc)
        return EXIT_CONFIG
    except RuntimeError as exc:
        log.error("oracle: %s", exc)
        return EXIT_INFEASIBLE
    rel = dp.objective / convex.objective - 1.0 if convex.objective else float("nan")
    sys.stdout.write(
        f"convex_objective = {convex.objective:.12g}\n"
        f"oracle_objective = {dp.objective:.12g}\n"
        f"relative_difference = {rel:.6g}\n"
    )
    return EXIT_OK


def _sizes(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tiltwing", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a scenario and write CSV outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("benchmark", help="time the pipeline over several N")
    p.add_argument("--config", required=True)
    p.add_argument("--sizes", type=_sizes, default=[100, 200, 400, 800, 1500])
    p.add_argument("--repeats", type=int, default=1)

    p = sub.add_parser("validate", help="simulate and audit a trajectory CSV")
    p.add_argument("--traj", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("oracle", help="compare the speed program with the grid oracle")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--n-a", type=int, default=OracleGrid.n_a)
    p.add_argument("--n-E", type=int, default=OracleGrid.n_E)
    return ap


def main(argv=None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return run_solve(args.config, args.out)
    if args.command == "benchmark":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            log.error("config error: %s", exc)
            return EXIT_CONFIG
        result = run_benchmark(cfg, args.sizes, args.repeats)
        sys.stdout.write(result.to_text())
        return EXIT_OK
    if args.command == "validate":
        return run_validate(args.traj, args.config, args.out)
    return run_oracle(args.config, args.n, OracleGrid(args.n_a, args.n_E))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
