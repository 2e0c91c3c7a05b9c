"""Arc-length discretised paths and scenario path generators.

Vertical position follows ``z_dot = -V sin(gamma)``, so altitude is ``-z``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .vehicle import DEG

PATH_KINDS = ("forward_smooth", "forward_level", "backward_climb")


@dataclass(frozen=True)
class PathNodes:
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if x.shape != z.shape or x.ndim != 1:
            raise ValueError("x and z must be 1-D arrays of equal length")
        step = np.hypot(np.diff(x), np.diff(z))
        if np.any(step == 0):
            k = int(np.flatnonzero(step == 0)[0])
            raise ValueError(f"zero-length step between nodes {k} and {k + 1}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def altitude(self) -> np.ndarray:
        return -self.z


@dataclass(frozen=True)
class DiscretePath:
    s: np.ndarray
    delta: np.ndarray
    gamma_star: np.ndarray  # N+1 values
    gamma_star_prime: np.ndarray  # N values
    nodes: PathNodes

    @property
    def N(self) -> int:
        return self.delta.shape[0]

    @property
    def length(self) -> float:
        return float(np.sum(self.delta))


def flight_path_rate(gamma, delta):
    """Forward differences of ``gamma`` over ``delta``; the last rate is
    replicated from the one before it (N values from N+1 angles)."""
    N = delta.shape[0]
    gp = np.empty(N)
    gp[: N - 1] = (gamma[1:N] - gamma[: N - 1]) / delta[: N - 1]
    gp[N - 1] = gp[N - 2]
    return gp


def discretise_path(nodes: PathNodes) -> DiscretePath:
    dx = np.diff(nodes.x)
    dz = np.diff(nodes.z)
    N = dx.shape[0]
    if N < 3:
        raise ValueError("a path needs at least N = 3 steps")
    delta = np.hypot(dx, dz)
    gamma = np.empty(N + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma[:N] = np.where(dx != 0, np.arctan(-dz / dx), np.sign(-dz) * np.pi / 2)
    gamma[N] = gamma[N - 1]
    s = np.concatenate([[0.0], np.cumsum(delta)])
    return DiscretePath(s, delta, gamma, flight_path_rate(gamma, delta), nodes)


def synthesize_nodes(gamma, delta, x0=0.0, z0=0.0) -> PathNodes:
    """Integrate node positions from flight-path angles (left rule)."""
    x = np.concatenate([[x0], x0 + np.cumsum(delta * np.cos(gamma[:-1]))])
    z = np.concatenate([[z0], z0 - np.cumsum(delta * np.sin(gamma[:-1]))])
    return PathNodes(x, z)


def reinitialise_reference(path: DiscretePath, gamma) -> DiscretePath:
    """Replace the reference angle with ``gamma`` and rebuild the path."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != path.gamma_star.shape:
        raise ValueError("gamma must have N+1 entries")
    delta = path.delta
    gp = flight_path_rate(gamma, delta)
    nodes = synthesize_nodes(gamma, delta, path.nodes.x[0], path.nodes.z[0])
    return DiscretePath(path.s.copy(), delta.copy(), gamma.copy(), gp, nodes)


def cosine_ramp(s, length, start, end):
    """Smooth blend from ``start`` at s=0 to ``end`` at s=length, flat after."""
    r = np.clip(np.asarray(s, dtype=float) / length, 0.0, 1.0)
    return end + (start - end) * 0.5 * (1.0 + np.cos(np.pi * r))


def graded_arc_length(length, N, grading=0.0, cluster="start"):
    """Node abscissae on ``[0, length]``.

    ``grading = 0`` gives a uniform mesh; ``grading = 1`` a quadratic one
    (``s = L u^2``) whose steps shrink linearly toward the clustered end.
    Low-speed ends want small steps because the objective weight ``1/V``
    is largest there.
    """
    if not 0.0 <= grading <= 1.0:
        raise ValueError("grading must lie in [0, 1]")
    if cluster not in ("start", "end"):
        raise ValueError("cluster must be 'start' or 'end'")
    u = np.linspace(0.0, 1.0, N + 1)
    if cluster == "end":
        u = 1.0 - u[::-1]
    s = length * ((1.0 - grading) * u + grading * u * u)
    if cluster == "end":
        s = length - s[::-1]
    s[0], s[-1] = 0.0, length
    return s


def generate_scenario_path(
    kind: str,
    length: float,
    N: int,
    gamma0: float = 0.0,
    gamma_f: float = 0.0,
    ramp_fraction: float = 1.0,
    grading: float = 0.0,
    cluster: str = "start",
) -> PathNodes:
    """Nodes for one of the built-in scenario shapes.

    ``forward_smooth`` ramps the flight-path angle from ``gamma0`` to
    ``gamma_f`` with a cosine blend over ``ramp_fraction * length``;
    ``forward_level`` is a horizontal line; ``backward_climb`` is a straight
    line inclined at ``gamma0``. See :func:`graded_arc_length` for the mesh.
    """
    if length <= 0:
        raise ValueError("path length must be positive")
    if N < 3:
        raise ValueError("a path needs at least N = 3 steps")
    s = graded_arc_length(length, N, grading, cluster)
    delta = np.diff(s)
    if kind == "forward_smooth":
        if not 0 < ramp_fraction <= 1:
            raise ValueError("ramp_fraction must lie in (0, 1]")
        gamma = cosine_ramp(s, ramp_fraction * length, gamma0, gamma_f)
    elif kind == "forward_level":
        gamma = np.zeros(N + 1)
    elif kind == "backward_climb":
        gamma = np.full(N + 1, gamma0)
    else:
        raise ValueError(f"unknown path kind {kind!r}")
    return synthesize_nodes(gamma, delta)


def write_path_csv(nodes: PathNodes, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x_m", "z_m"])
        for x, z in zip(nodes.x, nodes.z):
            w.writerow([repr(float(x)), repr(float(z))])


def read_path_csv(path) -> PathNodes:
    """Two-column (x, z) CSV in meters; a non-numeric header row is skipped."""
    xs, zs = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                x, z = float(row[0]), float(row[1])
            except ValueError:
                if xs:
                    raise
                continue
            xs.append(x)
            zs.append(z)
    return PathNodes(np.array(xs), np.array(zs))


__all__ = [
    "DEG",
    "DiscretePath",
    "PATH_KINDS",
    "PathNodes",
    "cosine_ramp",
    "discretise_path",
    "flight_path_rate",
    "generate_scenario_path",
    "graded_arc_length",
    "read_path_csv",
    "reinitialise_reference",
    "synthesize_nodes",
    "write_path_csv",
]
