"""CSV and text outputs: trajectories, simulation traces, reports, manifests."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .pipeline import TimeTrajectory
from .validation import SimTrace, ValidationReport
from .vehicle import DEG

# (column, attribute, factor applied on write)
TRAJECTORY_COLUMNS = (
    ("t_s", "t", 1.0),
    ("s_m", "s", 1.0),
    ("x_m", "x", 1.0),
    ("z_m", "z", 1.0),
    ("V_mps", "V", 1.0),
    ("E_m2ps2", "E", 1.0),
    ("a_mps2", "a", 1.0),
    ("tau_N", "tau", 1.0),
    ("T_N", "T", 1.0),
    ("alpha_deg", "alpha", 1.0 / DEG),
    ("gamma_deg", "gamma", 1.0 / DEG),
    ("gamma_star_deg", "gamma_star", 1.0 / DEG),
    ("iw_deg", "iw", 1.0 / DEG),
    ("tilt_rate_degps", "tilt_rate", 1.0 / DEG),
    ("M_Nm", "M", 1.0),
)
TRAJECTORY_HEADER = tuple(c[0] for c in TRAJECTORY_COLUMNS)

SIMTRACE_COLUMNS = (
    ("t_s", "t", 1.0),
    ("x_m", "x", 1.0),
    ("z_m", "z", 1.0),
    ("V_mps", "V", 1.0),
    ("gamma_deg", "gamma", 1.0 / DEG),
    ("iw_deg", "iw", 1.0 / DEG),
    ("tilt_rate_degps", "tilt_rate", 1.0 / DEG),
    ("T_N", "T", 1.0),
    ("M_Nm", "M", 1.0),
)


def _write_columns(obj, columns, path):
    data = np.column_stack([np.asarray(getattr(obj, attr), dtype=float) * f for _, attr, f in columns])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([c[0] for c in columns])
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def _read_columns(path, columns):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = tuple(h.strip() for h in rows[0])
    expected = tuple(c[0] for c in columns)
    if header != expected:
        raise ValueError(f"{path}: unexpected header {header}")
    body = [r for r in rows[1:] if r]
    data = np.array(body, dtype=float).reshape(len(body), len(columns))
    return {attr: data[:, i] / f for i, (_, attr, f) in enumerate(columns)}


def write_trajectory_csv(traj: TimeTrajectory, path) -> None:
    """One row per path node; angles in degrees, altitude is ``-z_m``."""
    _write_columns(traj, TRAJECTORY_COLUMNS, path)


def read_trajectory_csv(path) -> TimeTrajectory:
    """Inverse of :func:`write_trajectory_csv` (iteration metadata is not stored)."""
    return TimeTrajectory(**_read_columns(path, TRAJECTORY_COLUMNS))


def write_simtrace_csv(trace: SimTrace, path) -> None:
    _write_columns(trace, SIMTRACE_COLUMNS, path)


def read_simtrace_csv(path) -> SimTrace:
    return SimTrace(**_read_columns(path, SIMTRACE_COLUMNS))


def write_report(report: ValidationReport, path) -> None:
    Path(path).write_text(report.to_text(), encoding="utf-8")


def read_key_values(path) -> dict:
    """Parse a ``key = value`` block; numbers become floats where possible."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" not in line or line.lstrip().startswith(("#", "[")):
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out


__all__ = [
    "SIMTRACE_COLUMNS",
    "TRAJECTORY_COLUMNS",
    "TRAJECTORY_HEADER",
    "read_key_values",
    "read_simtrace_csv",
    "read_trajectory_csv",
    "write_report",
    "write_simtrace_csv",
    "write_trajectory_csv",
]
