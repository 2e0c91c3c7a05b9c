"""Independent checks of a solved transition.

* :func:`simulate_time_domain` integrates the nonlinear point-mass and wing
  dynamics in time, driven open-loop by the reconstructed thrust and moment.
* :func:`residual_audit` evaluates the space-domain equations of motion on
  the solved samples, including the full arcsin effective-angle model.
* :func:`dp_speed_oracle` solves small speed programs by exhaustive dynamic
  programming over gridded energy and acceleration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._jit import USE_NUMBA, njit
from .path import DiscretePath, PathNodes
from .pipeline import TimeTrajectory
from .speed import E_FLOOR, SpeedBounds, dynamics_coefficients
from .vehicle import VehicleParams, aero_forces, derive_constants


class SimulationError(RuntimeError):
    """The integrated speed reached zero (polar coordinates break down)."""


class NoFeasibleTerminal(RuntimeError):
    """The oracle found no path to the terminal energy."""


# --------------------------------------------------------------------------
# Time-domain simulation
# --------------------------------------------------------------------------


@dataclass
class SimTrace:
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    V: np.ndarray
    gamma: np.ndarray
    iw: np.ndarray
    tilt_rate: np.ndarray
    T: np.ndarray
    M: np.ndarray

    @property
    def altitude(self):
        return -self.z

    def sample(self, t):
        """Linear interpolation of every state at times ``t``."""
        t = np.asarray(t, dtype=float)
        cols = {k: np.interp(t, self.t, getattr(self, k)) for k in
                ("x", "z", "V", "gamma", "iw", "tilt_rate", "T", "M")}
        return SimTrace(t=t, **cols)


def _param_vector(params: VehicleParams):
    return np.array(
        [params.m, params.g, params.half_rho_S, params.rho_An, params.mu,
         params.a0, params.a1, params.b0, params.b1, params.Jw]
    )


def _rk4_loop(tk, Tk, Mk, y0, n_steps, dt, pv):
    m, g, hrs, ran, mu, a0, a1, b0, b1, Jw = (
        pv[0], pv[1], pv[2], pv[3], pv[4], pv[5], pv[6], pv[7], pv[8], pv[9]
    )
    out = np.empty((n_steps + 1, 8))
    y = y0.copy()
    k = np.empty((4, 6))
    tmp = np.empty(6)
    seg = 0
    nk = tk.shape[0]
    failed = -1

    for step in range(n_steps + 1):
        t = step * dt
        # Inputs at the current time (kept for the trace).
        while seg < nk - 2 and tk[seg + 1] <= t:
            seg += 1
        r = (t - tk[seg]) / (tk[seg + 1] - tk[seg])
        r = min(max(r, 0.0), 1.0)
        out[step, 6] = Tk[seg] + r * (Tk[seg + 1] - Tk[seg])
        out[step, 7] = Mk[seg] + r * (Mk[seg + 1] - Mk[seg])
        out[step, 0:6] = y
        if y[2] <= 0.0:
            failed = step
            break
        if step == n_steps:
            break
        for stage in range(4):
            if stage == 0:
                ts = t
                for i in range(6):
                    tmp[i] = y[i]
            else:
                h = dt if stage == 3 else 0.5 * dt
                ts = t + h
                for i in range(6):
                    tmp[i] = y[i] + h * k[stage - 1, i]
            s2 = seg
            while s2 < nk - 2 and tk[s2 + 1] <= ts:
                s2 += 1
            rr = (ts - tk[s2]) / (tk[s2 + 1] - tk[s2])
            rr = min(max(rr, 0.0), 1.0)
            T = Tk[s2] + rr * (Tk[s2 + 1] - Tk[s2])
            M = Mk[s2] + rr * (Mk[s2 + 1] - Mk[s2])
            V = tmp[2]
            gam = tmp[3]
            alpha = tmp[4] - gam
            E = V * V
            Ee = E + 2.0 * T / ran
            if Ee > 0.0:
                arg = V * math.sin(alpha) / math.sqrt(Ee)
                arg = min(max(arg, -1.0), 1.0)
                ae = math.asin(arg)
            else:
                ae = 0.0
            D = hrs * ((1.0 - mu) * (a1 * alpha + a0) * E + mu * (a1 * ae + a0) * Ee)
            L = hrs * ((1.0 - mu) * (b1 * alpha + b0) * E + mu * (b1 * ae + b0) * Ee)
            Vs = V if abs(V) > 1e-12 else 1e-12
            k[stage, 0] = V * math.cos(gam)
            k[stage, 1] = -V * math.sin(gam)
            k[stage, 2] = (T * math.cos(alpha) - D) / m - g * math.sin(gam)
            k[stage, 3] = (T * math.sin(alpha) + L - m * g * math.cos(gam)) / (m * Vs)
            k[stage, 4] = tmp[5]
            k[stage, 5] = M / Jw
        for i in range(6):
            y[i] = y[i] + dt / 6.0 * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
    return out, failed


_rk4_numba = njit(_rk4_loop)


def _rk4(*args):
    if USE_NUMBA:
        return _rk4_numba(*args)
    return _rk4_loop(*args)


def default_time_step(traj: TimeTrajectory) -> float:
    """A quarter of the shortest node-to-node transit time."""
    return float(np.min(np.diff(traj.t))) / 4.0


def simulate_time_domain(traj: TimeTrajectory, params: VehicleParams, dt: float | None = None) -> SimTrace:
    """Integrate the time-domain dynamics with fixed-step RK4.

    The angle of attack is taken as ``iw - gamma`` from the integrated
    states, not replayed from the solution, so inconsistencies between the
    tilt schedule and the flight-path evolution show up as drift.
    """
    if traj.t.shape[0] < 2:
        raise ValueError("trajectory needs at least two samples")
    dt = default_time_step(traj) if dt is None else float(dt)
    if not dt > 0:
        raise ValueError("dt must be positive")
    t_end = float(traj.t[-1])
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    dt = t_end / n_steps
    y0 = np.array([traj.x[0], traj.z[0], traj.V[0], traj.gamma[0], traj.iw[0], traj.tilt_rate[0]])
    out, failed = _rk4(
        np.ascontiguousarray(traj.t, dtype=float),
        np.ascontiguousarray(traj.T, dtype=float),
        np.ascontiguousarray(traj.M, dtype=float),
        y0, n_steps, dt, _param_vector(params),
    )
    if failed >= 0:
        raise SimulationError(f"speed reached zero at t = {failed * dt:.4g} s")
    t = np.arange(n_steps + 1) * dt
    return SimTrace(t, *(out[:, i] for i in range(8)))


# --------------------------------------------------------------------------
# Residual audit
# --------------------------------------------------------------------------


@dataclass
class ValidationReport:
    """Maxima over samples; forces are normalized by ``m g``."""

    max_position_error: float = 0.0  # m, distance from the resynthesized path
    max_velocity_error: float = 0.0  # m/s
    max_gamma_error: float = 0.0  # rad
    final_speed_error: float = 0.0  # m/s
    max_tangential_residual: float = 0.0
    max_normal_residual: float = 0.0
    max_exact_normal_residual: float = 0.0
    max_combined_residual: float = 0.0  # tangential + lambda * normal
    max_sin_error: float = 0.0  # |sin(alpha) - alpha|
    max_cos_error: float = 0.0  # |1 - cos(alpha)|
    max_arcsin_clamp: float = 0.0
    thrust_excess: float = 0.0  # max(T / T_max - 1, 0)
    arc_length: float = 0.0
    simulated: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def position_error_fraction(self):
        return self.max_position_error / self.arc_length if self.arc_length > 0 else 0.0

    def as_dict(self):
        d = asdict(self)
        extras = d.pop("extras")
        d["position_error_fraction"] = self.position_error_fraction
        d.update(extras)
        return d

    def to_text(self) -> str:
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k} = {v!r}" if not isinstance(v, float) else f"{k} = {v:.12g}")
        return "\n".join(lines) + "\n"


def distance_to_polyline(px, pz, nodes: PathNodes):
    """Euclidean distance from each point to the piecewise-linear path."""
    px = np.atleast_1d(np.asarray(px, dtype=float))
    pz = np.atleast_1d(np.asarray(pz, dtype=float))
    nx, nz = nodes.x, nodes.z
    tree = cKDTree(np.column_stack([nx, nz]))
    _, idx = tree.query(np.column_stack([px, pz]))
    best = np.full(px.shape, np.inf)
    # The nearest segment touches the nearest node for well-spaced paths;
    # checking the two neighbours of the nearest node is enough.
    for off in (-1, 0):
        i = np.clip(idx + off, 0, nx.shape[0] - 2)
        ax, az = nx[i], nz[i]
        bx, bz = nx[i + 1], nz[i + 1]
        ux, uz = bx - ax, bz - az
        L2 = ux * ux + uz * uz
        r = np.clip(((px - ax) * ux + (pz - az) * uz) / L2, 0.0, 1.0)
        best = np.minimum(best, np.hypot(px - ax - r * ux, pz - az - r * uz))
    return best


def _eom_residuals(traj: TimeTrajectory, params: VehicleParams):
    N = traj.N
    mg = params.weight
    m = params.m
    lam = derive_constants(params).lam
    delta = np.diff(traj.s)
    E = traj.E[:N]
    a = traj.a[:N]
    T = traj.T[:N]
    tau = traj.tau[:N]
    alpha = traj.alpha[:N]
    gamma = traj.gamma[:N]
    gp = np.diff(traj.gamma) / delta
    V = np.sqrt(np.maximum(E, 0.0))
    L, D = aero_forces(V, alpha, T, params)
    r_tan = m * a - (T * np.cos(alpha) - D - mg * np.sin(gamma))
    r_nrm = m * E * gp - (T * np.sin(alpha) + L - mg * np.cos(gamma))
    # Normal balance written with the virtual input, effective angle exact.
    Ee = E + 2.0 * tau / params.rho_An
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(Ee > 0, V * np.sin(alpha) / np.sqrt(Ee), 0.0)
    clamp = np.abs(arg - np.clip(arg, -1.0, 1.0))
    ae = np.arcsin(np.clip(arg, -1.0, 1.0))
    hrs, mu = params.half_rho_S, params.mu
    L_exact = hrs * ((1 - mu) * (params.b1 * alpha + params.b0) * E + mu * (params.b1 * ae + params.b0) * Ee)
    r_exact = m * E * gp - (tau * np.sin(alpha) + L_exact - mg * np.cos(gamma))
    return r_tan / mg, r_nrm / mg, r_exact / mg, (r_tan + lam * r_nrm) / mg, clamp


def residual_audit(
    traj: TimeTrajectory, params: VehicleParams, trace: SimTrace | None = None
) -> ValidationReport:
    """Equation-of-motion residuals on the solved samples, plus tracking
    errors of ``trace`` when a simulation is supplied."""
    rep = ValidationReport(arc_length=float(traj.s[-1] - traj.s[0]) if traj.N > 0 else 0.0)
    if traj.N < 1:
        return rep
    r_tan, r_nrm, r_exact, rc, clamp = _eom_residuals(traj, params)
    rep.max_tangential_residual = float(np.max(np.abs(r_tan)))
    rep.max_normal_residual = float(np.max(np.abs(r_nrm)))
    rep.max_exact_normal_residual = float(np.max(np.abs(r_exact)))
    rep.max_combined_residual = float(np.max(np.abs(rc)))
    rep.max_arcsin_clamp = float(np.max(clamp))
    rep.max_sin_error = float(np.max(np.abs(np.sin(traj.alpha) - traj.alpha)))
    rep.max_cos_error = float(np.max(np.abs(1.0 - np.cos(traj.alpha))))
    rep.thrust_excess = float(max(0.0, np.max(traj.T) / params.T_max - 1.0))
    if trace is not None:
        at = trace.sample(traj.t)
        nodes = PathNodes(traj.x, traj.z)
        rep.max_position_error = float(np.max(distance_to_polyline(trace.x, trace.z, nodes)))
        rep.max_velocity_error = float(np.max(np.abs(at.V - traj.V)))
        rep.max_gamma_error = float(np.max(np.abs(at.gamma - traj.gamma)))
        rep.final_speed_error = float(abs(trace.V[-1] - traj.V[-1]))
        rep.simulated = True
    return rep


def validate_trajectory(traj: TimeTrajectory, params: VehicleParams, dt: float | None = None):
    """Simulate and audit; returns ``(report, trace)``."""
    trace = simulate_time_domain(traj, params, dt)
    return residual_audit(traj, params, trace), trace


# --------------------------------------------------------------------------
# Dynamic-programming oracle for the speed program
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleGrid:
    n_a: int = 41
    n_E: int = 1601

    def __post_init__(self):
        if self.n_a < 2 or self.n_E < 2:
            raise ValueError("grids need at least two points")

    def refined(self) -> "OracleGrid":
        return OracleGrid(2 * self.n_a - 1, 2 * self.n_E - 1)


@dataclass
class OracleResult:
    objective: float
    E: np.ndarray
    a: np.ndarray
    tau: np.ndarray


def _dp_backward_loop(E_grid, a_grid, delta, c, d, m, T_max, a_lo, a_hi, E_floor, terminal_ok):
    # On a uniform grid, snapping E + 2 a delta moves the index by a fixed
    # offset, so each decision is an index shift with a realized acceleration.
    nE = E_grid.shape[0]
    na = a_grid.shape[0]
    N = delta.shape[0]
    dE = E_grid[1] - E_grid[0]
    J = np.full((N + 1, nE), np.inf)
    nxt = np.full((N, nE), -1, dtype=np.int64)
    for i in range(nE):
        if terminal_ok[i]:
            J[N, i] = 0.0
    offsets = np.empty(na, dtype=np.int64)
    for k in range(N - 1, 0, -1):
        for j in range(na):
            offsets[j] = int(math.floor(2.0 * a_grid[j] * delta[k] / dE + 0.5))
        for i in range(nE):
            E = E_grid[i]
            w = delta[k] / math.sqrt(max(E, E_floor))
            for j in range(na):
                off = offsets[j]
                if j > 0 and off == offsets[j - 1]:
                    continue
                idx = i + off
                if idx < 0 or idx >= nE:
                    continue
                a = off * dE / (2.0 * delta[k])
                if a < a_lo or a > a_hi:
                    continue
                tau = m * a + c[k] * E + d[k]
                if tau < 0.0 or tau > T_max:
                    continue
                v = (tau / T_max) ** 2 * w + J[k + 1, idx]
                if v < J[k, i]:
                    J[k, i] = v
                    nxt[k, i] = idx
    return J, nxt


def _stage_options(E, k, E_grid, a_grid, delta, c, d, m, T_max, a_lo, a_hi):
    """Reachable next-state indices from an off-grid energy ``E`` at stage
    ``k`` with their realized thrust and a feasibility mask."""
    dE = E_grid[1] - E_grid[0]
    idx = np.floor((E + 2.0 * a_grid * delta[k] - E_grid[0]) / dE + 0.5).astype(np.int64)
    inside = (idx >= 0) & (idx < E_grid.shape[0])
    idx = np.clip(idx, 0, E_grid.shape[0] - 1)
    # Charge the acceleration the snapped transition realizes.
    a = (E_grid[idx] - E) / (2.0 * delta[k])
    tau = m * a + c[k] * E + d[k]
    ok = inside & (tau >= 0) & (tau <= T_max) & (a >= a_lo) & (a <= a_hi)
    return idx, tau, ok


def _dp_backward_numpy(E_grid, a_grid, delta, c, d, m, T_max, a_lo, a_hi, E_floor, terminal_ok):
    nE = E_grid.shape[0]
    N = delta.shape[0]
    dE = E_grid[1] - E_grid[0]
    J = np.full((N + 1, nE), np.inf)
    nxt = np.full((N, nE), -1, dtype=np.int64)
    J[N, terminal_ok] = 0.0
    rows = np.arange(nE)
    for k in range(N - 1, 0, -1):
        w = delta[k] / np.sqrt(np.maximum(E_grid, E_floor))
        base = c[k] * E_grid + d[k]
        best = J[k]
        offsets = np.floor(2.0 * a_grid * delta[k] / dE + 0.5).astype(np.int64)
        # Offsets are nondecreasing in a; keep the first of each run.
        keep = np.concatenate([[True], offsets[1:] != offsets[:-1]])
        for off in offsets[keep]:
            off = int(off)
            a = off * dE / (2.0 * delta[k])
            if a < a_lo or a > a_hi:
                continue
            lo, hi = max(0, -off), min(nE, nE - off)
            if lo >= hi:
                continue
            tau = m * a + base[lo:hi]
            cost = (tau / T_max) ** 2 * w[lo:hi] + J[k + 1, lo + off : hi + off]
            better = (tau >= 0.0) & (tau <= T_max) & (cost < best[lo:hi])
            best[lo:hi] = np.where(better, cost, best[lo:hi])
            nxt[k, lo:hi] = np.where(better, rows[lo:hi] + off, nxt[k, lo:hi])
    return J, nxt


_dp_backward_numba = njit(_dp_backward_loop)


def _dp_backward(*args):
    if USE_NUMBA:
        return _dp_backward_numba(*args)
    return _dp_backward_numpy(*args)


def dp_speed_oracle(
    path: DiscretePath,
    params: VehicleParams,
    bounds: SpeedBounds,
    grid: OracleGrid | None = None,
    E_floor: float = E_FLOOR,
    max_stages: int = 12,
) -> OracleResult:
    """Grid dynamic programming over ``(E_k, a_k)`` for the speed program.

    The first state is the exact initial energy; later states are snapped to
    the energy grid. Each stage is charged with the acceleration its snapped
    transition actually realizes, so every returned sequence satisfies the
    energy recursion exactly and the objective is an upper bound on the
    convex optimum up to the terminal tolerance. Terminal states within one
    grid cell of ``Vf^2`` are accepted.
    """
    grid = grid or OracleGrid()
    N = path.N
    if N > max_stages:
        raise ValueError(f"oracle limited to N <= {max_stages}")
    c, d = dynamics_coefficients(
        path.gamma_star[:N], path.gamma_star_prime, params, None, bounds.drag_delta
    )
    E_max = bounds.V_max**2
    E_grid = np.linspace(0.0, E_max, grid.n_E)
    dE = E_grid[1] - E_grid[0]
    a_grid = np.linspace(bounds.a_lo, bounds.a_hi, grid.n_a)
    Ef = bounds.Vf**2
    terminal_ok = np.abs(E_grid - Ef) <= dE * (1 + 1e-12)
    delta = np.ascontiguousarray(path.delta, dtype=float)
    m, T_max = params.m, bounds.T_max
    a_lo, a_hi = bounds.a_lo, bounds.a_hi
    J, nxt = _dp_backward(E_grid, a_grid, delta, c, d, m, T_max, a_lo, a_hi, E_floor, terminal_ok)

    # First stage from the exact initial energy.
    E0 = bounds.V0**2
    idx, tau0, ok = _stage_options(E0, 0, E_grid, a_grid, delta, c, d, m, T_max, a_lo, a_hi)
    tail = J[1, idx] if N > 1 else np.where(terminal_ok[idx], 0.0, np.inf)
    cost = np.where(ok, (tau0 / T_max) ** 2 * delta[0] / math.sqrt(max(E0, E_floor)) + tail, np.inf)
    j0 = int(np.argmin(cost))
    if not np.isfinite(cost[j0]):
        raise NoFeasibleTerminal("no feasible terminal state")

    E = np.empty(N + 1)
    E[0] = E0
    i = int(idx[j0])
    E[1] = E_grid[i]
    for k in range(1, N):
        i = int(nxt[k, i])
        E[k + 1] = E_grid[i]
    a = np.diff(E) / (2.0 * delta)
    tau = m * a + c * E[:N] + d
    return OracleResult(float(cost[j0]), E, a, tau)


__all__ = [
    "NoFeasibleTerminal",
    "OracleGrid",
    "OracleResult",
    "SimTrace",
    "SimulationError",
    "ValidationReport",
    "default_time_step",
    "distance_to_polyline",
    "dp_speed_oracle",
    "residual_audit",
    "simulate_time_domain",
    "validate_trajectory",
]
