"""Physical parameters and aero-propulsive relations of the tiltwing vehicle.

Angles are radians throughout. Lift/drag slopes given per degree are
converted once when a parameter set is built (see :func:`vahana`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

DEG = math.pi / 180.0
ALPHA_VALIDITY = 30.0 * DEG


@dataclass(frozen=True)
class VehicleParams:
    m: float
    g: float
    S: float
    A: float
    n: int
    mu: float
    Jw: float
    rho: float
    b0: float
    b1: float  # per rad
    a0: float
    a1: float  # per rad
    T_max: float
    k_w: float = 2.0
    alpha_range: tuple[float, float] = (-20.0 * DEG, 20.0 * DEG)
    gamma_range: tuple[float, float] = (-90.0 * DEG, 90.0 * DEG)
    iw_range: tuple[float, float] = (0.0, 100.0 * DEG)
    accel_range: tuple[float, float] = (-0.3 * 9.81, 0.3 * 9.81)
    V_range: tuple[float, float] = (0.0, 40.0)
    M_range: tuple[float, float] = (-50.0, 50.0)

    def __post_init__(self):
        for name in ("m", "g", "S", "A", "rho", "Jw", "T_max", "k_w"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.b1 <= 0:
            raise ValueError("b1 must be positive")
        if self.a1 < 0:
            raise ValueError("a1 must be nonnegative")
        for name in ("alpha_range", "gamma_range", "iw_range", "accel_range", "V_range", "M_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound exceeds upper bound")

    @property
    def rho_An(self) -> float:
        return self.rho * self.A * self.n

    @property
    def half_rho_S(self) -> float:
        return 0.5 * self.rho * self.S

    @property
    def weight(self) -> float:
        return self.m * self.g

    def with_(self, **changes) -> "VehicleParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedConstants:
    lam: float
    s_star: float
    tau_gain: float


def vahana(**overrides) -> VehicleParams:
    """A^3 Vahana parameter set; slopes converted from per-degree to per-rad."""
    base = dict(
        m=752.2,
        g=9.81,
        S=8.93,
        A=2.83,
        n=4,
        mu=0.73,
        Jw=1100.0,
        rho=1.225,
        b0=0.43,
        b1=0.11 / DEG,
        a0=0.029,
        a1=0.004 / DEG,
        T_max=8855.0,
        k_w=2.0,
    )
    base.update(overrides)
    return VehicleParams(**base)


PRESETS = {"vahana": vahana}


def derive_constants(params: VehicleParams) -> DerivedConstants:
    if params.b1 == 0:
        raise ValueError("b1 = 0: drag/lift slope ratio undefined")
    lam = params.a1 / params.b1
    s_star = params.S / (params.A * params.n)
    tau_gain = params.mu * s_star * (params.a0 - lam * params.b0)
    return DerivedConstants(lam, s_star, tau_gain)


def induced_velocity(V, alpha, T, params: VehicleParams):
    """Propeller induced speed from momentum theory (nonnegative root)."""
    V, alpha, T = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (V, alpha, T)))
    Vc = V * np.cos(alpha)
    k = params.k_w * params.rho_An
    disc = np.sqrt(Vc * Vc + 4.0 * T / k)
    # Rationalized root avoids cancellation when Vc >> v_i.
    with np.errstate(invalid="ignore", divide="ignore"):
        vi = np.where(Vc >= 0, 2.0 * T / k / (Vc + disc), 0.5 * (disc - Vc))
    vi = np.where(T == 0, 0.0, vi)
    return vi[()] if vi.ndim == 0 else vi


def effective_flow(V, alpha, T, params: VehicleParams):
    """Effective speed and angle of attack seen by the blown wing."""
    V, alpha, T = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (V, alpha, T)))
    Ve = np.sqrt(V * V + 2.0 * T / params.rho_An)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(Ve > 0, V * np.sin(alpha) / Ve, 0.0)
    alpha_e = np.arcsin(np.clip(ratio, -1.0, 1.0))
    if Ve.ndim == 0:
        return Ve[()], alpha_e[()]
    return Ve, alpha_e


def aero_forces(V, alpha, T, params: VehicleParams):
    """Lift and drag with blown/unblown blending (quadratic drag term dropped)."""
    alpha_arr = np.asarray(alpha, dtype=float)
    if np.any(np.abs(alpha_arr) > ALPHA_VALIDITY):
        raise ValueError("angle of attack outside the +/-30 deg model validity range")
    V = np.asarray(V, dtype=float)
    Ve, alpha_e = effective_flow(V, alpha_arr, T, params)
    q_free = params.half_rho_S * V * V
    q_blown = params.half_rho_S * Ve * Ve
    mu = params.mu
    D = (1 - mu) * (params.a1 * alpha_arr + params.a0) * q_free + mu * (
        params.a1 * alpha_e + params.a0
    ) * q_blown
    L = (1 - mu) * (params.b1 * alpha_arr + params.b0) * q_free + mu * (
        params.b1 * alpha_e + params.b0
    ) * q_blown
    return L, D
