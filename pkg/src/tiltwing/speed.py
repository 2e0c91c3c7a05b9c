"""Speed-profile program: minimum proxy-thrust along a prescribed path.

Decision variables per stage are the kinetic-energy state ``E = V^2``, the
path acceleration ``a = V V'`` and the virtual thrust ``tau``. Inside the
conic program E is stored as ``E / V_max^2`` and tau as ``tau / T_max`` so
that every variable is of order one; :func:`extract_speed_profile` undoes the scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import CONST, ConicProgram, ProgramBuilder, SolverSolution, Status, ToleranceSet
from .path import DiscretePath
from .vehicle import DerivedConstants, VehicleParams, derive_constants

E_FLOOR = 1e-4  # m^2/s^2


class InvariantViolation(RuntimeError):
    """A solved profile breaks one of its defining constraints."""


@dataclass(frozen=True)
class SpeedBounds:
    V0: float
    Vf: float
    a_lo: float
    a_hi: float
    V_max: float
    T_max: float
    drag_delta: float = 0.0

    def __post_init__(self):
        if not (0 <= self.V0 <= self.V_max and 0 <= self.Vf <= self.V_max):
            raise ValueError("boundary speeds must lie in [0, V_max]")
        if self.a_lo > self.a_hi:
            raise ValueError("a_lo exceeds a_hi")
        if self.T_max <= 0:
            raise ValueError("T_max must be positive")
        if self.drag_delta < 0:
            raise ValueError("drag_delta must be nonnegative")

    @classmethod
    def from_params(cls, params: VehicleParams, V0, Vf, drag_delta=0.0):
        return cls(
            V0=V0,
            Vf=Vf,
            a_lo=params.accel_range[0],
            a_hi=params.accel_range[1],
            V_max=params.V_range[1],
            T_max=params.T_max,
            drag_delta=drag_delta,
        )


@dataclass
class SpeedProfile:
    E: np.ndarray
    a: np.ndarray
    tau: np.ndarray
    objective: float
    status: Status

    @property
    def V(self):
        return np.sqrt(np.maximum(self.E, 0.0))


@dataclass(frozen=True)
class SpeedVariableMap:
    E: np.ndarray
    a: np.ndarray
    tau: np.ndarray
    t: np.ndarray
    w: np.ndarray
    E_scale: float
    tau_scale: float
    delta: np.ndarray
    bounds: SpeedBounds
    E_floor: float
    coeff_c: np.ndarray
    coeff_d: np.ndarray
    m: float


def dynamics_coefficients(gamma_star, gamma_star_prime, params, derived=None, drag_delta=0.0):
    """Coefficients ``(c, d)`` of the combined longitudinal equation
    ``m a + c E + d = tau``."""
    derived = derived or derive_constants(params)
    lam = derived.lam
    c = (
        lam * params.m * np.asarray(gamma_star_prime, dtype=float)
        + params.half_rho_S * (params.a0 - lam * params.b0)
        + drag_delta
    )
    gs = np.asarray(gamma_star, dtype=float)
    d = params.weight * (np.sin(gs) + lam * np.cos(gs))
    return c, d


def build_speed_program(
    path: DiscretePath,
    params: VehicleParams,
    bounds: SpeedBounds,
    E_floor: float = E_FLOOR,
    derived: DerivedConstants | None = None,
):
    """Assemble the discrete speed program as a :class:`ConicProgram`."""
    N = path.N
    if N < 3:
        raise ValueError("speed program needs N >= 3")
    delta = path.delta
    c, d = dynamics_coefficients(
        path.gamma_star[:N], path.gamma_star_prime, params, derived, bounds.drag_delta
    )
    Es = bounds.V_max**2
    Ts = bounds.T_max
    m = params.m

    B = ProgramBuilder()
    E_lo = np.full(N + 1, max(E_floor, 0.0) / Es)
    E_hi = np.ones(N + 1)
    # Boundary energies are pinned by equalities; bounds there would leave
    # no strictly feasible point.
    E_lo[[0, N]] = -np.inf
    E_hi[[0, N]] = np.inf
    iE = B.add_block("E", N + 1, E_lo, E_hi)
    ia = B.add_block("a", N, bounds.a_lo, bounds.a_hi)
    itau = B.add_block("tau", N, 0.0, 1.0)
    it = B.add_block("t", N)
    iw = B.add_block("w", N)

    # m a + c E + d = tau, divided through by T_max.
    B.add_rows([(ia, m / Ts), (iE[:N], c * Es / Ts), (itau, -1.0)], -d / Ts)
    # E_{k+1} = E_k + 2 a_k delta_k
    B.add_rows([(iE[1:], 1.0), (iE[:N], -1.0), (ia, -2.0 * delta / Es)], np.zeros(N))
    B.add_rows([(iE[[0]], 1.0)], [bounds.V0**2 / Es])
    B.add_rows([(iE[[N]], 1.0)], [bounds.Vf**2 / Es])

    for k in range(N):
        B.add_cone(iE[k], CONST, (iw[k],), 1.0, 0.5)  # w^2 <= E
        B.add_cone(it[k], iw[k], (itau[k],), 0.5, 1.0)  # tau^2 <= t w
    # sum (tau/T)^2 / sqrt(E) delta = sum t delta / V_max
    B.add_objective(it, delta / np.sqrt(Es))

    program = B.build()
    vmap = SpeedVariableMap(iE, ia, itau, it, iw, Es, Ts, delta.copy(), bounds, E_floor, c, d, m)
    return program, vmap


def speed_objective_value(E, tau, delta, T_max):
    return float(np.sum((tau / T_max) ** 2 * delta / np.sqrt(E[: tau.shape[0]])))


def extract_speed_profile(
    solution: SolverSolution, vmap: SpeedVariableMap, tol: ToleranceSet | None = None
) -> SpeedProfile:
    if solution.status != Status.OPTIMAL:
        raise ValueError(f"cannot extract a {solution.status.value} solution")
    tol = tol or ToleranceSet()
    x = solution.primal
    En = x[vmap.E]
    E = En * vmap.E_scale
    a = x[vmap.a]
    tau_n = x[vmap.tau]
    tau = tau_n * vmap.tau_scale
    b = vmap.bounds
    lim = 100.0 * tol.feas

    # Constraint checks in the program's (scaled) units.
    dyn = (vmap.m * a + vmap.coeff_c * E[:-1] + vmap.coeff_d - tau) / vmap.tau_scale
    rec = np.diff(En) - 2.0 * a * vmap.delta / vmap.E_scale
    checks = {
        "dynamics": np.max(np.abs(dyn)),
        "energy recursion": np.max(np.abs(rec)),
        "E0": abs(En[0] - b.V0**2 / vmap.E_scale),
        "EN": abs(En[-1] - b.Vf**2 / vmap.E_scale),
        "E bounds": max(0.0, np.max(En - 1.0), np.max(-En)),
        "tau bounds": max(0.0, np.max(tau_n - 1.0), np.max(-tau_n)),
        "a bounds": max(0.0, np.max(a - b.a_hi), np.max(b.a_lo - a)),
    }
    bad = {k: v for k, v in checks.items() if v > lim}
    if bad:
        raise InvariantViolation(f"speed profile violates constraints: {bad}")
    # Boundary energies are equality-pinned; drop the solver's rounding.
    E[0], E[-1] = b.V0**2, b.Vf**2
    objective = speed_objective_value(E, tau, vmap.delta, vmap.tau_scale)
    return SpeedProfile(E, a, tau, objective, solution.status)
