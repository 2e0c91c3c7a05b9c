"""Alternating speed/attitude solves with reference update, followed by
reconstruction of thrust and timing along the path."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .attitude import AttitudeBounds, AttitudeProfile, build_attitude_program, extract_attitude_profile
from .conic import Status, ToleranceSet, solve
from .path import DiscretePath, reinitialise_reference, synthesize_nodes
from .speed import E_FLOOR, SpeedBounds, SpeedProfile, build_speed_program, extract_speed_profile
from .vehicle import DerivedConstants, VehicleParams, derive_constants

log = logging.getLogger(__name__)


class TransitionInfeasible(RuntimeError):
    """A convex subproblem had no solution."""

    def __init__(self, stage: str, iteration: int, status: Status):
        super().__init__(f"{stage} returned {status.value} on iteration {iteration}")
        self.stage = stage
        self.iteration = iteration
        self.status = status


@dataclass(frozen=True)
class PipelineOptions:
    eps_gamma: float = 0.01
    max_iters: int = 10
    tol: ToleranceSet = field(default_factory=ToleranceSet)
    E_floor: float = E_FLOOR

    def __post_init__(self):
        if not self.eps_gamma > 0:
            raise ValueError("eps_gamma must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class TimeTrajectory:
    """Solved transition sampled at the N+1 path nodes.

    Stage quantities (a, tau, T, M) have N natural values; the last one is
    repeated so every column has N+1 entries.
    """

    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    z: np.ndarray
    V: np.ndarray
    E: np.ndarray
    a: np.ndarray
    tau: np.ndarray
    T: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    gamma_star: np.ndarray
    iw: np.ndarray
    tilt_rate: np.ndarray
    M: np.ndarray
    iterations_used: int = 0
    converged: bool = False
    objective_history: list = field(default_factory=list)
    speed_objective: float = float("nan")

    @property
    def altitude(self):
        return -self.z

    @property
    def N(self) -> int:
        return self.t.shape[0] - 1


@dataclass(frozen=True)
class TransitionProblem:
    """Everything the pipeline needs besides vehicle parameters and options."""

    path: DiscretePath
    speed_bounds: SpeedBounds
    attitude_bounds: AttitudeBounds


def thrust_denominator(alpha, params: VehicleParams, derived: DerivedConstants | None = None):
    derived = derived or derive_constants(params)
    alpha = np.asarray(alpha, dtype=float)
    return np.cos(alpha) + derived.lam * np.sin(alpha) - derived.tau_gain


def reconstruct_thrust(tau, alpha, params: VehicleParams, derived: DerivedConstants | None = None):
    """Thrust that reproduces the virtual input ``tau`` at angle of attack ``alpha``."""
    den = thrust_denominator(alpha, params, derived)
    if np.any(den <= 0):
        raise ValueError("non-positive thrust denominator: angle of attack outside model validity")
    return np.asarray(tau, dtype=float) / den


def time_map(E, delta):
    """Node times from ``t_k = sum_{j<k} delta_j / sqrt(E_j)``."""
    E = np.asarray(E, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if E.shape[0] != delta.shape[0] + 1:
        raise ValueError("E needs one more entry than delta")
    if np.any(E[:-1] <= 0):
        k = int(np.flatnonzero(E[:-1] <= 0)[0])
        raise ValueError(f"E[{k}] <= 0: time is undefined")
    return np.concatenate([[0.0], np.cumsum(delta / np.sqrt(E[:-1]))])


def _hold_last(v):
    return np.append(v, v[-1])


def solve_speed(path, params, bounds, options: PipelineOptions, iteration=1) -> SpeedProfile:
    program, vmap = build_speed_program(path, params, bounds, options.E_floor)
    sol = solve(program, options.tol)
    if sol.status != Status.OPTIMAL:
        raise TransitionInfeasible("speed program", iteration, sol.status)
    return extract_speed_profile(sol, vmap, options.tol)


def solve_attitude(path, speed, params, bounds, options: PipelineOptions, iteration=1) -> AttitudeProfile:
    program, vmap = build_attitude_program(path, speed, params, bounds, options.E_floor)
    sol = solve(program, options.tol)
    if sol.status != Status.OPTIMAL:
        raise TransitionInfeasible("attitude program", iteration, sol.status)
    return extract_attitude_profile(sol, vmap, options.tol)


def solve_transition(
    problem: TransitionProblem, params: VehicleParams, options: PipelineOptions | None = None
) -> TimeTrajectory:
    """Iterate speed and attitude solves until the flight-path angle stops
    moving by more than ``eps_gamma``, then reconstruct the trajectory."""
    options = options or PipelineOptions()
    derived = derive_constants(params)
    path = problem.path
    history = []
    converged = False
    it = 0
    for it in range(1, options.max_iters + 1):
        speed = solve_speed(path, params, problem.speed_bounds, options, it)
        att = solve_attitude(path, speed, params, problem.attitude_bounds, options, it)
        history.append(att.objective)
        change = float(np.max(np.abs(path.gamma_star - att.gamma)))
        log.info(
            "iteration %d: speed objective %.6g, attitude objective %.6g, max |dgamma| %.3g",
            it, speed.objective, att.objective, change,
        )
        if change <= options.eps_gamma:
            converged = True
            break
        if it < options.max_iters:
            path = reinitialise_reference(path, att.gamma)

    tau = _hold_last(speed.tau)
    T = reconstruct_thrust(tau, att.alpha, params, derived)
    E = speed.E
    V = speed.V
    nodes = synthesize_nodes(att.gamma, path.delta, path.nodes.x[0], path.nodes.z[0])
    return TimeTrajectory(
        t=time_map(E, path.delta),
        s=path.s.copy(),
        x=nodes.x,
        z=nodes.z,
        V=V,
        E=E.copy(),
        a=_hold_last(speed.a),
        tau=tau,
        T=T,
        alpha=att.alpha,
        gamma=att.gamma,
        gamma_star=path.gamma_star.copy(),
        iw=att.iw,
        tilt_rate=att.zeta * V,
        M=_hold_last(att.M),
        iterations_used=it,
        converged=converged,
        objective_history=history,
        speed_objective=speed.objective,
    )


__all__ = [
    "PipelineOptions",
    "TimeTrajectory",
    "TransitionInfeasible",
    "TransitionProblem",
    "reconstruct_thrust",
    "solve_attitude",
    "solve_speed",
    "solve_transition",
    "thrust_denominator",
    "time_map",
]
