import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from _planted import planted_program
from tiltwing.conic import (
    CONST,
    ConicProgram,
    ProgramBuilder,
    RotatedCone,
    Status,
    ToleranceSet,
    dump_program,
    load_program,
    primal_residuals,
    solve,
)

TOL = ToleranceSet()


def scalar_lp():
    return ConicProgram(1, [1.0], sp.csr_matrix((0, 1)), [], [3.0], [np.inf])


def epigraph_program():
    # min t  s.t.  2 t * 1 >= x^2,  x = 4
    return ConicProgram(
        2, [1.0, 0.0], sp.csr_matrix([[0.0, 1.0]]), [4.0], [-np.inf] * 2, [np.inf] * 2,
        [RotatedCone(0, CONST, (1,))],
    )


def test_scalar_lp():
    sol = solve(scalar_lp())
    assert sol.status == Status.OPTIMAL
    assert sol.primal[0] == pytest.approx(3.0, abs=1e-8)


def test_rotated_cone_epigraph():
    sol = solve(epigraph_program())
    assert sol.status == Status.OPTIMAL
    assert sol.primal[0] == pytest.approx(8.0, rel=1e-8)
    assert sol.objective_value == pytest.approx(8.0, rel=1e-8)


def test_infeasible_reported_as_status():
    p = ConicProgram(1, [1.0], sp.csr_matrix([[1.0]]), [1.0], [3.0], [np.inf])
    assert solve(p).status == Status.INFEASIBLE


def test_unbounded_reported_as_status():
    p = ConicProgram(1, [-1.0], sp.csr_matrix((0, 1)), [], [0.0], [np.inf])
    assert solve(p).status == Status.UNBOUNDED


def test_iteration_limit():
    program, _, _ = planted_program(np.random.default_rng(3), n_cones=6)
    sol = solve(program, ToleranceSet(max_iter=2))
    assert sol.status == Status.MAX_ITER


@pytest.mark.parametrize(
    "cone",
    [RotatedCone(0, 5, (1,)), RotatedCone(0, 1, (1,)), RotatedCone(0, CONST, (0,)), RotatedCone(-2, 1, (0,))],
)
def test_malformed_cones_rejected(cone):
    with pytest.raises(ValueError):
        ConicProgram(2, [0.0, 0.0], sp.csr_matrix((0, 2)), [], [-np.inf] * 2, [np.inf] * 2, [cone])


def test_row_count_mismatch_rejected():
    with pytest.raises(ValueError):
        ConicProgram(1, [1.0], sp.csr_matrix([[1.0]]), [1.0, 2.0], [0.0], [1.0])


def test_inverted_bounds_rejected():
    with pytest.raises(ValueError):
        ConicProgram(1, [1.0], sp.csr_matrix((0, 1)), [], [2.0], [1.0])


def test_builder_assembles_rows_and_cones():
    B = ProgramBuilder()
    x = B.add_block("x", 3, 0.0, 5.0)
    t = B.add_block("t", 1)
    B.add_rows([(x, 1.0)], np.ones(3))
    B.add_cone(t[0], CONST, x, 1.0, 1.0)
    B.add_objective(t, 2.0)
    p = B.build()
    assert p.num_vars == 4 and p.num_eq == 3 and len(p.cones) == 1
    sol = solve(p)
    assert sol.primal[3] == pytest.approx(1.5, rel=1e-8)  # 2 t >= 3
    assert sol.objective_value == pytest.approx(3.0, rel=1e-8)


def test_dump_and_load_round_trip(tmp_path):
    program, _, _ = planted_program(np.random.default_rng(11))
    f = tmp_path / "prog.txt"
    dump_program(program, f)
    back = load_program(f)
    assert back.num_vars == program.num_vars
    assert np.array_equal(back.c, program.c)
    assert (back.A != program.A).nnz == 0
    assert np.array_equal(back.b, program.b)
    assert np.array_equal(back.lower, program.lower) and np.array_equal(back.upper, program.upper)
    assert back.cones == program.cones
    assert solve(back).objective_value == solve(program).objective_value


def test_determinism_and_self_consistency():
    program, _, _ = planted_program(np.random.default_rng(5), n_cones=5)
    a, b = solve(program), solve(program)
    assert a.objective_value == pytest.approx(b.objective_value, rel=1e-9)
    assert a.objective_value == pytest.approx(float(program.c @ a.primal), rel=1e-9, abs=1e-12)


def test_optimal_residuals_within_tolerance():
    program, _, _ = planted_program(np.random.default_rng(8), n_cones=6)
    sol = solve(program)
    assert sol.status == Status.OPTIMAL
    assert sol.residuals.within(TOL)


def test_equilibration_can_be_disabled():
    program, _, ref = planted_program(np.random.default_rng(21))
    sol = solve(program, ToleranceSet(equilibrate=False))
    assert sol.status == Status.OPTIMAL
    assert sol.objective_value == pytest.approx(ref, rel=1e-6, abs=1e-7)


@pytest.mark.parametrize("seed", range(12))
def test_planted_optimum_recovered(seed):
    rng = np.random.default_rng(1000 + seed)
    program, _, ref = planted_program(rng, n_cones=int(rng.integers(2, 8)), n_extra=int(rng.integers(1, 8)))
    assert program.num_vars <= 50
    sol = solve(program)
    assert sol.status == Status.OPTIMAL
    assert sol.objective_value == pytest.approx(ref, rel=1e-4, abs=1e-6)


@settings(max_examples=100)
@given(seed=st.integers(0, 2**32 - 1), n_cones=st.integers(1, 6), n_extra=st.integers(1, 6))
def test_solver_outputs_are_cone_feasible(seed, n_cones, n_extra):
    program, _, ref = planted_program(np.random.default_rng(seed), n_cones=n_cones, n_extra=n_extra)
    sol = solve(program)
    assert sol.status == Status.OPTIMAL
    res = primal_residuals(program, sol.primal)
    assert res.primal_eq <= 10 * TOL.feas
    assert res.bound <= 10 * TOL.feas
    U, V, W2 = program.cone_values(sol.primal)
    assert np.all(2 * U * V - W2 >= -10 * TOL.feas)
    assert np.all(U >= -10 * TOL.feas) and np.all(V >= -10 * TOL.feas)
    assert sol.objective_value == pytest.approx(ref, rel=1e-5, abs=1e-6)


def test_cvxpy_cross_check():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(42)
    for _ in range(5):
        program, _, _ = planted_program(rng, n_cones=4, n_extra=4)
        x = cp.Variable(program.num_vars)
        cons = [program.A @ x == program.b]
        fin_lo = np.isfinite(program.lower)
        fin_hi = np.isfinite(program.upper)
        if fin_lo.any():
            cons.append(x[fin_lo] >= program.lower[fin_lo])
        if fin_hi.any():
            cons.append(x[fin_hi] <= program.upper[fin_hi])
        for cone in program.cones:
            U = cone.u_scale * (1.0 if cone.u == CONST else x[cone.u])
            V = cone.v_scale * x[cone.v]
            w = cp.hstack([x[i] for i in cone.w])
            # 2 U V >= |w|^2  <=>  ||(sqrt2 w, U - V)|| <= U + V
            cons.append(cp.SOC(U + V, cp.hstack([np.sqrt(2) * w, cp.reshape(U - V, (1,), order="C")])))
        ref = cp.Problem(cp.Minimize(program.c @ x), cons).solve()
        sol = solve(program)
        assert sol.objective_value == pytest.approx(ref, rel=1e-5, abs=1e-6)
