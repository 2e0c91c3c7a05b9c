"""Run configuration: INI parsing and problem assembly from scenario presets.

A config file has up to five sections; every key is optional and falls back
to the selected preset. Angles are given in degrees and converted on load.

.. code-block:: ini

    [vehicle]
    preset = vahana
    T_max = 8855

    [bounds]
    alpha_min_deg = -20
    alpha_max_deg = 20

    [scenario]
    preset = forward
    N = 1500

    [solver]
    feas = 1e-8

    [pipeline]
    eps_gamma = 0.01
    max_iters = 10

Any other section (for example the ``[run]`` block of a manifest) is ignored,
so a manifest can be fed back as a config.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .attitude import AttitudeBounds
from .conic import ToleranceSet
from .path import (
    PATH_KINDS,
    discretise_path,
    generate_scenario_path,
    read_path_csv,
)
from .pipeline import PipelineOptions, TransitionProblem
from .speed import E_FLOOR, SpeedBounds
from .vehicle import DEG, PRESETS, VehicleParams

SCENARIO_KINDS = PATH_KINDS + ("custom",)


class ConfigError(ValueError):
    """The configuration file is unreadable or inconsistent."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Boundary data and path description for one transition (SI, radians)."""

    kind: str
    V0: float
    Vf: float
    i0: float
    gamma0: float
    N: int
    length: float = 600.0
    i_f: float | None = None
    Omega0: float = 0.0
    gamma_f: float = 0.0
    ramp_fraction: float = 1.0
    grading: float = 0.0
    cluster: str = "start"
    drag_delta: float = 0.0
    path_csv: str | None = None

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.V0 < 0 or self.Vf < 0:
            raise ValueError("V0 and Vf must be nonnegative")
        if self.N < 3:
            raise ValueError("N must be at least 3")
        if self.kind == "custom" and not self.path_csv:
            raise ValueError("a custom scenario needs path_csv")
        if self.drag_delta < 0:
            raise ValueError("drag_delta must be nonnegative")

    def with_(self, **changes) -> "ScenarioSpec":
        return replace(self, **changes)


SCENARIO_PRESETS = {
    "forward": ScenarioSpec(
        kind="forward_smooth", V0=0.5, Vf=40.0, i0=75 * DEG, gamma0=75 * DEG, N=1500,
        length=600.0, grading=1.0,
    ),
    "forward_level": ScenarioSpec(
        kind="forward_level", V0=0.5, Vf=40.0, i0=75 * DEG, gamma0=75 * DEG, N=1500,
        length=600.0, grading=1.0,
    ),
    "backward": ScenarioSpec(
        kind="backward_climb", V0=40.0, Vf=0.1, i0=0.0, i_f=75 * DEG, gamma0=1.6 * DEG, N=1500,
        length=800.0, grading=1.0, cluster="end", drag_delta=2.0,
    ),
}


@dataclass(frozen=True)
class RunConfig:
    vehicle: VehicleParams
    scenario: ScenarioSpec
    options: PipelineOptions
    vehicle_preset: str = "vahana"
    scenario_preset: str = "forward"
    base_dir: Path = Path(".")

    def with_N(self, N: int) -> "RunConfig":
        return replace(self, scenario=self.scenario.with_(N=N))


# Config keys: name -> (attribute, converter from config text to SI).
def _deg(v):
    return float(v) * DEG


_VEHICLE_KEYS = {
    "m": ("m", float), "g": ("g", float), "S": ("S", float), "A": ("A", float),
    "n": ("n", int), "mu": ("mu", float), "Jw": ("Jw", float), "rho": ("rho", float),
    "b0": ("b0", float), "b1_per_deg": ("b1", lambda v: float(v) / DEG),
    "a0": ("a0", float), "a1_per_deg": ("a1", lambda v: float(v) / DEG),
    "T_max": ("T_max", float), "k_w": ("k_w", float),
}
_BOUND_KEYS = {
    "alpha": ("alpha_range", _deg), "gamma": ("gamma_range", _deg),
    "iw": ("iw_range", _deg), "a": ("accel_range", float),
    "V": ("V_range", float), "M": ("M_range", float),
}
_BOUND_UNITS = {"alpha": "_deg", "gamma": "_deg", "iw": "_deg", "a": "", "V": "", "M": ""}
_SCENARIO_KEYS = {
    "kind": ("kind", str), "V0": ("V0", float), "Vf": ("Vf", float),
    "i0_deg": ("i0", _deg), "i_f_deg": ("i_f", _deg), "Omega0_degps": ("Omega0", _deg),
    "gamma0_deg": ("gamma0", _deg), "gamma_f_deg": ("gamma_f", _deg), "N": ("N", int),
    "length_m": ("length", float), "ramp_fraction": ("ramp_fraction", float),
    "grading": ("grading", float), "cluster": ("cluster", str),
    "drag_delta": ("drag_delta", float), "path_csv": ("path_csv", str),
}
_SOLVER_KEYS = {"feas": float, "gap": float, "max_iter": int, "equilibrate": "bool"}
_PIPELINE_KEYS = {"eps_gamma": float, "max_iters": int, "E_floor": float}


def _check_keys(section, allowed):
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"[{section.name}]: unknown keys {sorted(extra)}")


def _vehicle_from(parser) -> tuple[str, VehicleParams]:
    sec = parser["vehicle"] if parser.has_section("vehicle") else {}
    bsec = parser["bounds"] if parser.has_section("bounds") else {}
    name = sec.get("preset", "vahana")
    if name not in PRESETS:
        raise ConfigError(f"unknown vehicle preset {name!r}")
    if sec:
        _check_keys(sec, set(_VEHICLE_KEYS) | {"preset"})
    bound_names = {f"{k}_{side}{_BOUND_UNITS[k]}" for k in _BOUND_KEYS for side in ("min", "max")}
    if bsec:
        _check_keys(bsec, bound_names)
    changes = {attr: conv(sec[key]) for key, (attr, conv) in _VEHICLE_KEYS.items() if key in sec}
    params = PRESETS[name](**changes)
    for key, (attr, conv) in _BOUND_KEYS.items():
        lo, hi = getattr(params, attr)
        unit = _BOUND_UNITS[key]
        if f"{key}_min{unit}" in bsec:
            lo = conv(bsec[f"{key}_min{unit}"])
        if f"{key}_max{unit}" in bsec:
            hi = conv(bsec[f"{key}_max{unit}"])
        changes[attr] = (lo, hi)
    return name, PRESETS[name](**changes)


def _scenario_from(parser) -> tuple[str, ScenarioSpec]:
    sec = parser["scenario"] if parser.has_section("scenario") else {}
    name = sec.get("preset", "forward")
    if name not in SCENARIO_PRESETS:
        raise ConfigError(f"unknown scenario preset {name!r}")
    if sec:
        _check_keys(sec, set(_SCENARIO_KEYS) | {"preset"})
    changes = {}
    for key, (attr, conv) in _SCENARIO_KEYS.items():
        if key in sec:
            text = sec[key].strip()
            changes[attr] = None if text.lower() == "none" and attr in ("i_f", "path_csv") else conv(text)
    return name, SCENARIO_PRESETS[name].with_(**changes)


def _options_from(parser) -> PipelineOptions:
    tol_kw, opt_kw = {}, {}
    if parser.has_section("solver"):
        sec = parser["solver"]
        _check_keys(sec, _SOLVER_KEYS)
        for key, conv in _SOLVER_KEYS.items():
            if key in sec:
                tol_kw[key] = sec.getboolean(key) if conv == "bool" else conv(sec[key])
    if parser.has_section("pipeline"):
        sec = parser["pipeline"]
        _check_keys(sec, _PIPELINE_KEYS)
        for key, conv in _PIPELINE_KEYS.items():
            if key in sec:
                opt_kw[key] = conv(sec[key])
    return PipelineOptions(tol=ToleranceSet(**tol_kw), **opt_kw)


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case sensitive (T_max, Jw)
    try:
        parser.read_string(text)
        vname, vehicle = _vehicle_from(parser)
        sname, scenario = _scenario_from(parser)
        options = _options_from(parser)
    except ConfigError:
        raise
    except (configparser.Error, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(vehicle, scenario, options, vname, sname, Path(base_dir))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, path.parent)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_text(cfg: RunConfig) -> str:
    """Fully expanded config; parsing it back gives an equal :class:`RunConfig`."""
    p, sc, opt = cfg.vehicle, cfg.scenario, cfg.options
    out = ["[vehicle]", f"preset = {cfg.vehicle_preset}"]
    for key, (attr, _) in _VEHICLE_KEYS.items():
        v = getattr(p, attr)
        if key.endswith("_per_deg"):
            v = v * DEG
        out.append(f"{key} = {_fmt(v)}")
    out += ["", "[bounds]"]
    for key, (attr, conv) in _BOUND_KEYS.items():
        lo, hi = getattr(p, attr)
        unit = _BOUND_UNITS[key]
        f = (lambda v: v / DEG) if conv is _deg else float
        out.append(f"{key}_min{unit} = {_fmt(f(lo))}")
        out.append(f"{key}_max{unit} = {_fmt(f(hi))}")
    out += ["", "[scenario]", f"preset = {cfg.scenario_preset}"]
    for key, (attr, conv) in _SCENARIO_KEYS.items():
        v = getattr(sc, attr)
        if v is not None and conv is _deg:
            v = v / DEG
        out.append(f"{key} = {_fmt(v)}")
    out += ["", "[solver]"]
    for key in _SOLVER_KEYS:
        out.append(f"{key} = {_fmt(getattr(opt.tol, key))}")
    out += ["", "[pipeline]"]
    for key in _PIPELINE_KEYS:
        out.append(f"{key} = {_fmt(getattr(opt, key))}")
    return "\n".join(out) + "\n"


def scenario_path(cfg: RunConfig):
    sc = cfg.scenario
    if sc.kind == "custom":
        csv_path = Path(sc.path_csv)
        if not csv_path.is_absolute():
            csv_path = cfg.base_dir / csv_path
        nodes = read_path_csv(csv_path)
    else:
        nodes = generate_scenario_path(
            sc.kind, sc.length, sc.N, sc.gamma0, sc.gamma_f, sc.ramp_fraction, sc.grading, sc.cluster
        )
    return discretise_path(nodes)


def build_problem(cfg: RunConfig) -> TransitionProblem:
    """Discretised path and bounds for the configured scenario."""
    sc, p = cfg.scenario, cfg.vehicle
    try:
        path = scenario_path(cfg)
        speed = SpeedBounds.from_params(p, sc.V0, sc.Vf, sc.drag_delta)
        att = AttitudeBounds.from_params(p, sc.i0, sc.Omega0, sc.gamma0, sc.i_f)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return TransitionProblem(path, speed, att)


__all__ = [
    "ConfigError",
    "E_FLOOR",
    "RunConfig",
    "SCENARIO_KINDS",
    "SCENARIO_PRESETS",
    "ScenarioSpec",
    "build_problem",
    "config_to_text",
    "load_config",
    "parse_config",
    "scenario_path",
]
