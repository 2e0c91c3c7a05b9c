import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tiltwing.vehicle import (
    DEG,
    aero_forces,
    derive_constants,
    effective_flow,
    induced_velocity,
    vahana,
)

P = vahana()

# Frozen from a hand evaluation of the table parameters with plain math.
LAMBDA = 0.036363636363636355
S_STAR = 0.78886925795053
TAU_GAIN = 0.007695778188242856


def test_derived_constants():
    d = derive_constants(P)
    assert d.lam == pytest.approx(LAMBDA, rel=1e-14)
    assert d.s_star == pytest.approx(S_STAR, rel=1e-14)
    assert d.tau_gain == pytest.approx(TAU_GAIN, rel=1e-12)
    assert d.lam == P.a1 / P.b1


def test_zero_drag_slope_gives_zero_ratio():
    assert derive_constants(P.with_(a1=0.0)).lam == 0.0


def test_slopes_converted_to_per_radian():
    assert P.b1 == pytest.approx(0.11 * 180 / math.pi)
    assert P.b1 == pytest.approx(6.3025, abs=1e-4)


@pytest.mark.parametrize(
    "field, value",
    [("m", 0.0), ("T_max", -1.0), ("n", 0), ("mu", 1.5), ("b1", 0.0), ("a1", -1.0), ("k_w", 0.0)],
)
def test_invalid_parameters_rejected(field, value):
    with pytest.raises(ValueError):
        P.with_(**{field: value})


def test_inverted_range_rejected():
    with pytest.raises(ValueError):
        P.with_(alpha_range=(0.3, -0.3))


def test_hover_induced_velocity():
    assert induced_velocity(0.0, 0.0, 8855.0, P) == pytest.approx(17.86849714743591, rel=1e-12)


def test_induced_velocity_zero_thrust():
    assert induced_velocity(12.0, 0.2, 0.0, P) == 0.0


def test_induced_velocity_forward_flight_root():
    vi = induced_velocity(10.0, 0.0, 1000.0, P)
    assert vi == pytest.approx(2.8138867125827947, rel=1e-12)
    assert abs(2 * P.rho_An * (10 + vi) * vi - 1000.0) < 1e-9


@given(
    V=st.floats(0, 40),
    alpha=st.floats(-0.5, 0.5),
    T=st.floats(0, 8855),
)
def test_momentum_balance(V, alpha, T):
    vi = induced_velocity(V, alpha, T, P)
    assert vi >= 0
    lhs = P.rho_An * (V * math.cos(alpha) + vi) * (P.k_w * vi)
    assert abs(lhs - T) <= 1e-9 * max(T, 1.0)


def test_effective_flow_unblown():
    Ve, ae = effective_flow(25.0, 0.1, 0.0, P)
    assert Ve == pytest.approx(25.0)
    assert ae == pytest.approx(0.1)


def test_effective_flow_hover():
    Ve, ae = effective_flow(0.0, 0.0, 8855.0, P)
    assert Ve == pytest.approx(35.73699429487182, rel=1e-12)
    assert ae == 0.0


def test_effective_flow_blowing_straightens_flow():
    Ve, ae = effective_flow(30.0, 0.1, 2000.0, P)
    assert Ve > 30.0 and ae < 0.1


def test_effective_flow_degenerate_is_zero_angle():
    _, ae = effective_flow(0.0, 0.3, 0.0, P)
    assert ae == 0.0


@given(V=st.floats(0, 40), alpha=st.floats(-0.5, 0.5), T=st.floats(0, 8855))
def test_effective_flow_identities(V, alpha, T):
    Ve, ae = effective_flow(V, alpha, T, P)
    assert Ve**2 - V**2 - 2 * T / P.rho_An == pytest.approx(0.0, abs=1e-9 * max(1.0, Ve**2))
    assert abs(Ve * math.sin(ae) - V * math.sin(alpha)) < 1e-9 * max(1.0, V)


def test_momentum_and_effective_flow_consistent_in_axial_flow():
    # With k_w = 2 the far-wake speed equals the effective speed when alpha = 0.
    V, T = 12.0, 3000.0
    vi = induced_velocity(V, 0.0, T, P)
    Ve, _ = effective_flow(V, 0.0, T, P)
    assert Ve == pytest.approx(V + P.k_w * vi, rel=1e-12)


def test_unblown_zero_alpha_forces():
    L, D = aero_forces(40.0, 0.0, 0.0, P)
    assert L == pytest.approx(3763.1020000000008, rel=1e-12)
    assert D == pytest.approx(P.half_rho_S * P.a0 * 1600.0, rel=1e-12)


def test_hover_blown_lift():
    L, _ = aero_forces(0.0, 0.0, 8855.0, P)
    assert L == pytest.approx(2192.728761925795, rel=1e-12)


def test_alpha_validity_guard():
    with pytest.raises(ValueError):
        aero_forces(20.0, 31 * DEG, 100.0, P)


@given(
    V=st.floats(0, 40),
    alpha=st.floats(-0.3, 0.3),
    T1=st.floats(0, 8855),
    T2=st.floats(0, 8855),
)
def test_forces_monotone_in_thrust(V, alpha, T1, T2):
    lo, hi = sorted((T1, T2))
    L1, D1 = aero_forces(V, alpha, lo, P)
    L2, D2 = aero_forces(V, alpha, hi, P)
    _, ae = effective_flow(V, alpha, hi, P)
    _, ae_lo = effective_flow(V, alpha, lo, P)
    if min(P.b1 * ae, P.b1 * ae_lo) + P.b0 > 0:
        assert L2 >= L1 - 1e-9 * max(1.0, abs(L1))
    if min(P.a1 * ae, P.a1 * ae_lo) + P.a0 > 0:
        assert D2 >= D1 - 1e-9 * max(1.0, abs(D1))


def test_forces_affine_in_alpha_without_blowing():
    a = np.linspace(-0.3, 0.3, 7)
    L, D = aero_forces(20.0, a, 0.0, P)
    assert np.allclose(np.diff(L, 2), 0.0, atol=1e-9)
    assert np.allclose(np.diff(D, 2), 0.0, atol=1e-9)
