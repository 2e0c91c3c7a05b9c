"""Attitude program: flight-path angle and tilt schedule along the
path, given a solved speed profile.

The tracking objective penalizes deviation of the flight-path angle from the
reference and the residual of the linearized normal-force balance. Each
square is moved into a rotated-cone epigraph. The tilt moment is stored as
``M / M_max`` in the program.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import CONST, ProgramBuilder, SolverSolution, Status, ToleranceSet
from .path import DiscretePath
from .speed import E_FLOOR, InvariantViolation, SpeedProfile
from .vehicle import VehicleParams


@dataclass(frozen=True)
class AttitudeBounds:
    alpha_range: tuple[float, float]
    gamma_range: tuple[float, float]
    iw_range: tuple[float, float]
    M_range: tuple[float, float]
    i0: float
    Omega0: float = 0.0
    gamma0: float | None = None
    i_f: float | None = None

    def __post_init__(self):
        for name in ("alpha_range", "gamma_range", "iw_range", "M_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound exceeds upper bound")
        if not self.iw_range[0] <= self.i0 <= self.iw_range[1]:
            raise ValueError("i0 outside the tilt-angle range")
        if self.i_f is not None and not self.iw_range[0] <= self.i_f <= self.iw_range[1]:
            raise ValueError("i_f outside the tilt-angle range")
        if self.gamma0 is not None and not self.gamma_range[0] <= self.gamma0 <= self.gamma_range[1]:
            raise ValueError("gamma0 outside the flight-path angle range")

    @classmethod
    def from_params(cls, params: VehicleParams, i0, Omega0=0.0, gamma0=None, i_f=None):
        return cls(
            alpha_range=params.alpha_range,
            gamma_range=params.gamma_range,
            iw_range=params.iw_range,
            M_range=params.M_range,
            i0=i0,
            Omega0=Omega0,
            gamma0=gamma0,
            i_f=i_f,
        )


@dataclass
class AttitudeProfile:
    alpha: np.ndarray
    gamma: np.ndarray
    iw: np.ndarray
    Psi: np.ndarray
    zeta: np.ndarray
    M: np.ndarray
    objective: float
    tracking_term: float
    eom_term: float
    status: Status


@dataclass(frozen=True)
class AttitudeVariableMap:
    alpha: np.ndarray
    gamma: np.ndarray
    iw: np.ndarray
    Psi: np.ndarray
    zeta: np.ndarray
    M: np.ndarray
    M_scale: float
    path: DiscretePath
    E: np.ndarray  # floored, N values
    a: np.ndarray
    p: np.ndarray
    q: np.ndarray
    bounds: AttitudeBounds
    params: VehicleParams


def pq_coefficients(E, tau, params: VehicleParams):
    """Slope ``p`` [N/rad] and offset ``q`` [N] of the linearized normal force
    ``p alpha + q``, blending blown and free-stream contributions."""
    E = np.asarray(E, dtype=float)
    tau = np.asarray(tau, dtype=float)
    k = params.half_rho_S
    mu = params.mu
    ran = params.rho_An
    p = tau + (1 - mu) * k * params.b1 * E + mu * k * params.b1 * np.sqrt(E * E + 2.0 * tau * E / ran)
    q = (1 - mu) * k * params.b0 * E + mu * k * params.b0 * (E + 2.0 * tau / ran)
    return p, q


def tracking_terms(alpha, gamma, Psi, path: DiscretePath, E, p, q, params: VehicleParams):
    """The two objective sums, evaluated on stages ``0..N-1``."""
    N = path.N
    w = path.delta / np.sqrt(E)
    track = float(np.sum(w * (gamma[:N] - path.gamma_star[:N]) ** 2))
    mg = params.weight
    eom = p * alpha[:N] + q - params.m * E * Psi - mg * np.cos(path.gamma_star[:N])
    return track, float(np.sum(w * (eom / mg) ** 2))


def build_attitude_program(
    path: DiscretePath,
    speed: SpeedProfile,
    params: VehicleParams,
    bounds: AttitudeBounds,
    E_floor: float = E_FLOOR,
):
    """Assemble the discrete attitude program."""
    N = path.N
    if speed.E.shape[0] != N + 1 or speed.a.shape[0] != N or speed.tau.shape[0] != N:
        raise ValueError("speed profile length does not match the path")
    if speed.status != Status.OPTIMAL:
        raise ValueError("speed profile is not optimal")
    delta = path.delta
    E0 = float(speed.E[0])
    if E0 <= 0:
        raise ValueError("initial speed must be positive to fix the initial tilt rate")
    E = np.maximum(speed.E[:N], E_floor)
    a = speed.a
    p, q = pq_coefficients(E, speed.tau, params)
    m, mg = params.m, params.weight
    Ms = max(abs(bounds.M_range[0]), abs(bounds.M_range[1]), 1.0)

    B = ProgramBuilder()
    ial = B.add_block("alpha", N + 1, *bounds.alpha_range)
    iga = B.add_block("gamma", N + 1, *bounds.gamma_range)
    iiw = B.add_block("iw", N + 1, *bounds.iw_range)
    ipsi = B.add_block("Psi", N)
    ize = B.add_block("zeta", N + 1)
    iM = B.add_block("M", N, bounds.M_range[0] / Ms, bounds.M_range[1] / Ms)
    ie = B.add_block("gamma_err", N)
    ir = B.add_block("eom_res", N)
    ite = B.add_block("t_err", N)
    itr = B.add_block("t_res", N)

    # Values fixed by boundary equalities carry no bounds so the program
    # keeps a strictly feasible interior (i0 may sit on the range edge).
    pinned = [iiw[0], iiw[1]]
    if bounds.gamma0 is not None:
        pinned += [iga[0], ial[0]]
    if bounds.i_f is not None:
        pinned.append(iiw[N])
    B.set_bounds(np.array(pinned), -np.inf, np.inf)

    B.add_rows([(iiw, 1.0), (ial, -1.0), (iga, -1.0)], np.zeros(N + 1))
    B.add_rows([(iga[1:], 1.0), (iga[:N], -1.0), (ipsi, -delta)], np.zeros(N))
    B.add_rows([(iiw[1:], 1.0), (iiw[:N], -1.0), (ize[:N], -delta)], np.zeros(N))
    B.add_rows(
        [(ize[1:], 1.0), (ize[:N], -(1.0 - a * delta / E)), (iM, -Ms * delta / (params.Jw * E))],
        np.zeros(N),
    )
    B.add_rows([(ize[[0]], 1.0)], [bounds.Omega0 / np.sqrt(E0)])
    B.add_rows([(iiw[[0]], 1.0)], [bounds.i0])
    if bounds.gamma0 is not None:
        B.add_rows([(iga[[0]], 1.0)], [bounds.gamma0])
    if bounds.i_f is not None:
        B.add_rows([(iiw[[N]], 1.0)], [bounds.i_f])

    # Residual definitions; the EOM residual is normalized by m g.
    B.add_rows([(ie, 1.0), (iga[:N], -1.0)], -path.gamma_star[:N])
    B.add_rows(
        [(ir, 1.0), (ial[:N], -p / mg), (ipsi, m * E / mg)],
        (q - mg * np.cos(path.gamma_star[:N])) / mg,
    )
    weight = delta / np.sqrt(E)
    for k in range(N):
        B.add_cone(ite[k], CONST, (ie[k],), 0.5, 1.0)  # e^2 <= t
        B.add_cone(itr[k], CONST, (ir[k],), 0.5, 1.0)
    B.add_objective(ite, weight)
    B.add_objective(itr, weight)

    program = B.build()
    vmap = AttitudeVariableMap(ial, iga, iiw, ipsi, ize, iM, Ms, path, E, a, p, q, bounds, params)
    return program, vmap


def extract_attitude_profile(
    solution: SolverSolution, vmap: AttitudeVariableMap, tol: ToleranceSet | None = None
) -> AttitudeProfile:
    if solution.status != Status.OPTIMAL:
        raise ValueError(f"cannot extract a {solution.status.value} solution")
    tol = tol or ToleranceSet()
    x = solution.primal
    alpha, gamma, iw = x[vmap.alpha], x[vmap.gamma], x[vmap.iw]
    Psi, zeta = x[vmap.Psi], x[vmap.zeta]
    M = x[vmap.M] * vmap.M_scale
    path, E, a, b, P = vmap.path, vmap.E, vmap.a, vmap.bounds, vmap.params
    delta = path.delta
    lim = 100.0 * tol.feas
    zeta_next = zeta[:-1] * (1.0 - a * delta / E) + M * delta / (P.Jw * E)

    def excess(v, rng):
        return max(0.0, float(np.max(v - rng[1])), float(np.max(rng[0] - v)))

    checks = {
        "iw = alpha + gamma": np.max(np.abs(iw - alpha - gamma)),
        "gamma recursion": np.max(np.abs(np.diff(gamma) - Psi * delta)),
        "iw recursion": np.max(np.abs(np.diff(iw) - zeta[:-1] * delta)),
        "zeta recursion": np.max(np.abs(zeta[1:] - zeta_next)),
        "initial tilt": abs(iw[0] - b.i0),
        "alpha bounds": excess(alpha[1:] if b.gamma0 is not None else alpha, b.alpha_range),
        "gamma bounds": excess(gamma, b.gamma_range),
        "iw bounds": excess(iw[2:-1] if b.i_f is not None else iw[2:], b.iw_range),
        "M bounds": excess(M / vmap.M_scale, (b.M_range[0] / vmap.M_scale, b.M_range[1] / vmap.M_scale)),
    }
    if b.gamma0 is not None:
        checks["initial gamma"] = abs(gamma[0] - b.gamma0)
    if b.i_f is not None:
        checks["terminal tilt"] = abs(iw[-1] - b.i_f)
    bad = {k: v for k, v in checks.items() if v > lim}
    if bad:
        raise InvariantViolation(f"attitude profile violates constraints: {bad}")
    track, eom = tracking_terms(alpha, gamma, Psi, path, E, vmap.p, vmap.q, P)
    return AttitudeProfile(alpha, gamma, iw, Psi, zeta, M, track + eom, track, eom, solution.status)


__all__ = [
    "AttitudeBounds",
    "AttitudeProfile",
    "AttitudeVariableMap",
    "build_attitude_program",
    "extract_attitude_profile",
    "pq_coefficients",
    "tracking_terms",
]
