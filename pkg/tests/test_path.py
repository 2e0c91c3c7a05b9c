import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tiltwing.path import (
    PathNodes,
    discretise_path,
    generate_scenario_path,
    graded_arc_length,
    read_path_csv,
    reinitialise_reference,
    synthesize_nodes,
    write_path_csv,
)
from tiltwing.vehicle import DEG


def level_nodes(N=10, L=100.0):
    return PathNodes(np.linspace(0, L, N + 1), np.zeros(N + 1))


def test_level_path_has_zero_angle_and_rate():
    p = discretise_path(level_nodes())
    assert np.all(p.gamma_star == 0) and np.all(p.gamma_star_prime == 0)


def test_climb_45_degrees():
    x = np.arange(6.0)
    p = discretise_path(PathNodes(x, -x))
    assert np.allclose(p.gamma_star, np.pi / 4)


def test_vertical_segment_maps_to_right_angle():
    p = discretise_path(PathNodes(np.array([0.0, 0, 0, 0]), np.array([0.0, -1, -2, -3])))
    assert np.allclose(p.gamma_star, np.pi / 2)


def test_circular_arc_rate():
    R, N = 200.0, 400
    theta = np.linspace(0, 0.8, N + 1)
    # Descending arc: altitude -R(1 - cos), gamma = -theta.
    p = discretise_path(PathNodes(R * np.sin(theta), R * (1 - np.cos(theta))))
    assert np.allclose(p.gamma_star_prime, -1.0 / R, rtol=2e-3)


def test_endpoint_replication():
    theta = np.linspace(0, 0.5, 12) ** 2
    p = discretise_path(PathNodes(np.sin(theta) * 50, -(1 - np.cos(theta)) * 50))
    assert p.gamma_star[-1] == p.gamma_star[-2]
    assert p.gamma_star_prime[-1] == p.gamma_star_prime[-2]


def test_mesh_invariants():
    nodes = generate_scenario_path("forward_smooth", 300.0, 50, 75 * DEG, 0.0, grading=0.7)
    p = discretise_path(nodes)
    assert np.all(p.delta > 0)
    assert np.allclose(np.diff(p.s), p.delta)
    assert np.allclose(p.delta**2, np.diff(nodes.x) ** 2 + np.diff(nodes.z) ** 2)
    assert np.all(p.gamma_star > -np.pi / 2) and np.all(p.gamma_star <= np.pi / 2)


def test_zero_step_rejected():
    with pytest.raises(ValueError):
        PathNodes(np.array([0.0, 1, 1, 2]), np.zeros(4))


def test_too_few_steps_rejected():
    with pytest.raises(ValueError):
        discretise_path(level_nodes(N=2))


def test_generator_level():
    p = discretise_path(generate_scenario_path("forward_level", 1000.0, 1000))
    assert np.all(p.gamma_star == 0)


def test_generator_forward_smooth_endpoints():
    p = discretise_path(generate_scenario_path("forward_smooth", 600.0, 300, 75 * DEG, 0.0))
    assert abs(p.gamma_star[0] - 75 * DEG) <= 0.5 * DEG
    assert p.gamma_star[-1] <= 2 * DEG


def test_generator_backward_climb():
    p = discretise_path(generate_scenario_path("backward_climb", 800.0, 100, 1.6 * DEG))
    assert p.gamma_star[0] == pytest.approx(1.6 * DEG)


@pytest.mark.parametrize("kwargs", [dict(length=0.0), dict(N=2), dict(kind="spiral")])
def test_generator_rejects_bad_input(kwargs):
    args = dict(kind="forward_level", length=100.0, N=10) | kwargs
    with pytest.raises(ValueError):
        generate_scenario_path(**args)


@pytest.mark.parametrize("cluster", ["start", "end"])
def test_graded_mesh(cluster):
    s = graded_arc_length(100.0, 20, 1.0, cluster)
    d = np.diff(s)
    assert s[0] == 0.0 and s[-1] == 100.0
    assert np.all(d > 0)
    if cluster == "start":
        assert d[0] < d[-1]
    else:
        assert d[-1] < d[0]


def test_uniform_mesh_default():
    assert np.allclose(np.diff(graded_arc_length(10.0, 5)), 2.0)


def test_resynthesis_reproduces_smooth_path():
    nodes = generate_scenario_path("forward_smooth", 500.0, 400, 75 * DEG, 0.0)
    p = discretise_path(nodes)
    back = synthesize_nodes(p.gamma_star, p.delta, nodes.x[0], nodes.z[0])
    assert np.max(np.hypot(back.x - nodes.x, back.z - nodes.z)) <= 1e-6 * 500.0


def test_reinitialise_fixed_point():
    p = discretise_path(generate_scenario_path("forward_smooth", 500.0, 200, 75 * DEG, 0.0))
    q = reinitialise_reference(p, p.gamma_star)
    assert np.max(np.abs(q.nodes.x - p.nodes.x)) <= 1e-9 * 500
    assert np.max(np.abs(q.nodes.z - p.nodes.z)) <= 1e-9 * 500
    assert np.array_equal(q.gamma_star_prime, p.gamma_star_prime)


def test_reinitialise_zero_gamma_stays_level():
    p = discretise_path(level_nodes())
    q = reinitialise_reference(p, np.zeros(p.N + 1))
    assert np.all(q.nodes.z == 0.0)


def test_reinitialise_uniform_shift():
    L = 100.0
    p = discretise_path(level_nodes(N=20, L=L))
    q = reinitialise_reference(p, p.gamma_star + 0.01)
    assert np.allclose(q.gamma_star_prime, p.gamma_star_prime)
    assert -q.nodes.z[-1] == pytest.approx(L * np.sin(0.01), rel=1e-12)


@given(st.lists(st.floats(-1.2, 1.2), min_size=5, max_size=40))
def test_reinitialise_preserves_arc_length(gammas):
    N = len(gammas) - 1
    p = discretise_path(level_nodes(N=N, L=50.0))
    q = reinitialise_reference(p, np.array(gammas))
    assert np.sum(q.delta) == np.sum(p.delta)
    assert np.array_equal(q.s, p.s)


def test_reinitialise_idempotent():
    p = discretise_path(generate_scenario_path("forward_smooth", 200.0, 50, 60 * DEG, 0.0))
    g = p.gamma_star + 0.05 * np.sin(np.linspace(0, 3, p.N + 1))
    once = reinitialise_reference(p, g)
    twice = reinitialise_reference(once, g)
    assert np.array_equal(once.nodes.x, twice.nodes.x)
    assert np.array_equal(once.gamma_star_prime, twice.gamma_star_prime)


def test_path_csv_round_trip(tmp_path):
    nodes = generate_scenario_path("forward_smooth", 100.0, 20, 40 * DEG, 0.0)
    f = tmp_path / "path.csv"
    write_path_csv(nodes, f)
    back = read_path_csv(f)
    assert np.array_equal(back.x, nodes.x) and np.array_equal(back.z, nodes.z)
