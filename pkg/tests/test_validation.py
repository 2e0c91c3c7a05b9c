import numpy as np
import pytest
from scipy.optimize import fsolve

from tiltwing.path import PathNodes, discretise_path, generate_scenario_path
from tiltwing.pipeline import TimeTrajectory, reconstruct_thrust
from tiltwing.speed import SpeedBounds, dynamics_coefficients
from tiltwing.validation import (
    NoFeasibleTerminal,
    OracleGrid,
    SimulationError,
    ValidationReport,
    default_time_step,
    distance_to_polyline,
    dp_speed_oracle,
    residual_audit,
    simulate_time_domain,
)
from tiltwing.vehicle import DEG, aero_forces, vahana

from _oracle_cases import oracle_instances
from _scenarios import solved

P = vahana()


def straight_trajectory(V, gamma, iw, T, t_end=10.0, n=101, M=0.0, tilt_rate=0.0):
    """Samples of a constant-speed straight flight (used as simulator input)."""
    t = np.linspace(0.0, t_end, n)
    s = V * t
    full = lambda v: np.full(n, float(v))
    return TimeTrajectory(
        t=t, s=s, x=s * np.cos(gamma), z=-s * np.sin(gamma), V=full(V), E=full(V * V),
        a=full(0.0), tau=full(T), T=full(T), alpha=full(iw - gamma), gamma=full(gamma),
        gamma_star=full(gamma), iw=full(iw), tilt_rate=full(tilt_rate), M=full(M),
    )


def level_trim(V):
    """Angle of attack and thrust balancing the full force model in level flight."""
    def eqs(u):
        alpha, T = u
        L, D = aero_forces(V, alpha, T, P)
        return [T * np.cos(alpha) - D, T * np.sin(alpha) + L - P.weight]
    return fsolve(eqs, [0.06, 500.0], xtol=1e-13)


def test_trim_is_an_equilibrium():
    alpha, T = level_trim(40.0)
    assert 0.0 < alpha < 0.07
    trace = simulate_time_domain(straight_trajectory(40.0, 0.0, alpha, T), P, dt=0.01)
    assert np.max(np.abs(trace.V - 40.0)) < 1e-3
    assert np.max(np.abs(trace.gamma)) < 1e-3
    assert trace.z == pytest.approx(np.zeros_like(trace.z), abs=1e-3)


def test_free_fall_without_aerodynamics():
    bare = P.with_(a0=0.0, a1=0.0, b0=0.0, mu=0.0)
    # Zero angle of attack so the remaining lift slope contributes nothing.
    traj = straight_trajectory(5.0, -90 * DEG, -90 * DEG, 0.0, t_end=3.0)
    trace = simulate_time_domain(traj, bare, dt=0.01)
    assert np.allclose(trace.V, 5.0 + P.g * trace.t, rtol=1e-10)
    assert np.allclose(trace.gamma, -90 * DEG, atol=1e-12)


def test_zero_moment_holds_tilt():
    traj = straight_trajectory(30.0, 0.0, 10 * DEG, 400.0, t_end=2.0)
    trace = simulate_time_domain(traj, P, dt=0.01)
    assert np.all(trace.iw == 10 * DEG)
    assert np.all(trace.tilt_rate == 0.0)


def test_constant_moment_gives_quadratic_tilt():
    traj = straight_trajectory(30.0, 0.0, 0.1, 400.0, t_end=2.0, M=20.0)
    trace = simulate_time_domain(traj, P, dt=0.01)
    assert np.allclose(trace.iw, 0.1 + 0.5 * 20.0 / P.Jw * trace.t**2, atol=1e-12)


def test_simulation_stops_when_speed_vanishes():
    # Vertical coast without thrust or lift: V = 5 - g t reaches zero near 0.51 s.
    bare = P.with_(a0=0.0, a1=0.0, b0=0.0, mu=0.0)
    traj = straight_trajectory(5.0, 90 * DEG, 90 * DEG, 0.0, t_end=2.0)
    with pytest.raises(SimulationError, match="t = 0.5"):
        simulate_time_domain(traj, bare, dt=0.01)


def test_simulation_input_checks():
    traj = straight_trajectory(30.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        simulate_time_domain(traj, P, dt=-1.0)
    assert default_time_step(traj) == pytest.approx(0.1 / 4)


def test_distance_to_polyline():
    nodes = PathNodes(np.array([0.0, 10.0, 10.0]), np.array([0.0, 0.0, -10.0]))
    d = distance_to_polyline(np.array([5.0, 12.0, 10.0, -3.0]), np.array([1.0, -5.0, -12.0, 4.0]), nodes)
    assert np.allclose(d, [1.0, 2.0, 2.0, 5.0])


def synthetic_alpha_zero(gamma=3 * DEG, N=20, delta=5.0):
    """Straight inclined flight at zero angle of attack whose thrust comes
    from the stage equality; the combined balance then holds exactly."""
    s = np.arange(N + 1) * delta
    E = np.linspace(400.0, 484.0, N + 1)
    a = np.diff(E) / (2 * delta)
    c, d = dynamics_coefficients(np.full(N, gamma), np.zeros(N), P)
    tau = P.m * a + c * E[:N] + d
    tau = np.append(tau, tau[-1])
    a = np.append(a, a[-1])
    T = reconstruct_thrust(tau, 0.0, P)
    full = lambda v: np.full(N + 1, float(v))
    return TimeTrajectory(
        t=np.concatenate([[0.0], np.cumsum(delta / np.sqrt(E[:-1]))]), s=s,
        x=s * np.cos(gamma), z=-s * np.sin(gamma), V=np.sqrt(E), E=E, a=a, tau=tau, T=T,
        alpha=full(0.0), gamma=full(gamma), gamma_star=full(gamma), iw=full(gamma),
        tilt_rate=full(0.0), M=full(0.0),
    )


def test_combined_residual_vanishes_on_consistent_samples():
    rep = residual_audit(synthetic_alpha_zero(), P)
    assert rep.max_combined_residual < 1e-9
    assert rep.max_sin_error == 0.0 and rep.max_cos_error == 0.0
    assert rep.max_arcsin_clamp == 0.0
    # The normal balance is not enforced by the construction.
    assert rep.max_normal_residual > 1e-3


def test_zero_length_report():
    one = lambda v: np.array([float(v)])
    traj = TimeTrajectory(*(one(0.0) for _ in range(15)))
    rep = residual_audit(traj, P)
    assert all(v == 0.0 for k, v in rep.as_dict().items() if isinstance(v, float))


def test_report_text_round_trip(tmp_path):
    from tiltwing.io import read_key_values, write_report
    rep = ValidationReport(max_position_error=1.5, arc_length=600.0, simulated=True)
    write_report(rep, tmp_path / "r.txt")
    kv = read_key_values(tmp_path / "r.txt")
    assert kv["max_position_error"] == 1.5 and kv["arc_length"] == 600.0


def test_forward_scenario_audit():
    cfg, _, tr = solved("forward")
    rep = residual_audit(tr, cfg.vehicle)
    assert rep.max_exact_normal_residual < 0.05
    assert rep.max_arcsin_clamp == 0.0
    for v in rep.as_dict().values():
        if isinstance(v, float):
            assert v >= 0.0


# -- grid oracle --------------------------------------------------------------


def test_oracle_forced_decisions():
    # A degenerate acceleration range leaves one decision per stage; the
    # energies 100, 144, 188, 232 lie on the unit-spaced grid.
    path = discretise_path(generate_scenario_path("forward_level", 30.0, 3))
    a = 2.2
    bounds = SpeedBounds(10.0, np.sqrt(232.0), a, a, 40.0, P.T_max)
    res = dp_speed_oracle(path, P, bounds, OracleGrid(5, 1601))
    E = np.array([100.0, 144.0, 188.0])
    c, d = dynamics_coefficients(np.zeros(3), np.zeros(3), P)
    tau = P.m * a + c * E + d
    expected = float(np.sum((tau / P.T_max) ** 2 * 10.0 / np.sqrt(E)))
    assert res.objective == pytest.approx(expected, rel=1e-12)
    assert np.allclose(res.E, [100.0, 144.0, 188.0, 232.0])


def test_oracle_reports_unreachable_terminal():
    path = discretise_path(generate_scenario_path("forward_level", 30.0, 5))
    bounds = SpeedBounds(10.0, 20.0, -0.1, 0.1, 40.0, P.T_max)
    with pytest.raises(NoFeasibleTerminal):
        dp_speed_oracle(path, P, bounds)


def test_oracle_limits_problem_size():
    path = discretise_path(generate_scenario_path("forward_level", 300.0, 20))
    with pytest.raises(ValueError):
        dp_speed_oracle(path, P, SpeedBounds.from_params(P, 20.0, 20.0))


def test_oracle_sequence_is_consistent():
    path, bounds, _ = next(oracle_instances(1, seed=1))
    res = dp_speed_oracle(path, P, bounds)
    assert np.allclose(np.diff(res.E), 2 * res.a * path.delta, rtol=1e-12, atol=1e-12)
    assert np.all(res.tau >= 0) and np.all(res.tau <= P.T_max)
    assert res.E[0] == bounds.V0**2


def test_oracle_never_beats_convex_program():
    for path, bounds, convex in oracle_instances(6, seed=3):
        dp = dp_speed_oracle(path, P, bounds)
        assert dp.objective >= convex.objective * (1 - 0.02)


@pytest.mark.xfail(
    strict=True,
    reason="snapped transitions on a refined grid are not a superset of the coarse ones "
    "and the one-cell terminal window shrinks, so refinement can raise the objective",
)
def test_oracle_grid_refinement_monotone():
    grid = OracleGrid()
    for path, bounds, _ in oracle_instances(8, seed=1):
        coarse = dp_speed_oracle(path, P, bounds, grid).objective
        fine = dp_speed_oracle(path, P, bounds, grid.refined()).objective
        assert fine <= coarse + 1e-6
