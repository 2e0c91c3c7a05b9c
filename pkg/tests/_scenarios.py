"""Scenario solves shared across test modules (each runs once per session)."""

from functools import lru_cache

from tiltwing.config import SCENARIO_PRESETS, RunConfig, build_problem
from tiltwing.pipeline import PipelineOptions, solve_speed, solve_transition
from tiltwing.vehicle import vahana


def preset_config(name: str, N: int | None = None) -> RunConfig:
    sc = SCENARIO_PRESETS[name]
    if N is not None:
        sc = sc.with_(N=N)
    return RunConfig(vahana(), sc, PipelineOptions(), scenario_preset=name)


@lru_cache(maxsize=None)
def solved(name: str, N: int | None = None):
    cfg = preset_config(name, N)
    problem = build_problem(cfg)
    return cfg, problem, solve_transition(problem, cfg.vehicle, cfg.options)


@lru_cache(maxsize=None)
def first_speed_objective(name: str, N: int) -> float:
    cfg = preset_config(name, N)
    problem = build_problem(cfg)
    return solve_speed(problem.path, cfg.vehicle, problem.speed_bounds, cfg.options).objective
