"""Scenario files, built-in presets, and assembly of a runnable configuration.

A scenario is a YAML (or JSON) document with five blocks::

    dos:     kind: isotropic | lorentzian, plus the model parameters
    grid:    strategy: quadratic | recurrence | uniform, n_modes, ...
    atom:    delta_upper, delta_lower, optional coupling_ratio
    run:     t_end, n_samples, rtol, atol, max_step, norm_tolerance,
             transient_end, tail_window
    output:  format: csv | structured, dir, name, spectra, report, reservoir

Band-edge scenarios are in units of ``C1**(2/3)``, Lorentzian ones in units
of ``gamma2``. The README lists every key.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Any

import yaml

from .discretize import (
    DEFAULT_MARGIN,
    DiscretizedReservoir,
    build_quadratic_grid,
    build_recurrence_grid,
    build_uniform_grid,
)
from .dos import DEFAULT_DELTA_OMEGA, DosModel, GeneralizedLorentzian, IsotropicBandEdge
from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, DEFAULT_SAMPLES, NORM_TOLERANCE, LadderConfig


class ConfigParseError(ValueError):
    """The scenario file could not be read as a mapping."""


class ScenarioError(ValueError):
    """The scenario is well formed but violates a precondition."""


BLOCKS = ("dos", "grid", "atom", "run", "output")

DOS_DEFAULTS = {
    "isotropic": {"edge": 0.0, "c_upper": 1.0, "c_lower": 1.0, "rho0": None},
    "lorentzian": {
        "center": 0.0,
        "half_width": 1.0,
        "order": 6,
        "gamma_upper": 1.0,
        "gamma_lower": 1.0,
        "rho0": 1.0,
    },
}
GRID_DEFAULTS = {
    "quadratic": {"n_modes": 150, "delta_omega": DEFAULT_DELTA_OMEGA, "margin": DEFAULT_MARGIN},
    "recurrence": {
        "n_modes": 150,
        "start": None,
        "rho0": None,
        "band_limit": None,
        "margin": DEFAULT_MARGIN,
        "cutoff": None,
    },
    "uniform": {"n_modes": 150, "low": -20.0, "up": 20.0, "margin": DEFAULT_MARGIN, "cutoff": None},
}
RUN_DEFAULTS = {
    "isotropic": {"t_end": 100.0},
    "lorentzian": {"t_end": 20.0},
    "common": {
        "n_samples": DEFAULT_SAMPLES,
        "rtol": DEFAULT_RTOL,
        "atol": DEFAULT_ATOL,
        "max_step": None,
        "norm_tolerance": NORM_TOLERANCE,
        "transient_end": 5.0,
        "tail_window": 0.25,
    },
}
OUTPUT_DEFAULTS = {
    "format": "csv",
    "dir": "out",
    "name": None,
    "spectra": False,
    "report": True,
    "reservoir": False,
}
UNITS = {"isotropic": "C1^(2/3)", "lorentzian": "gamma2"}

_C2 = 1.5
_U1 = 1.0
_U2 = _C2 ** (2.0 / 3.0)

_ISOTROPIC_BASE = {
    "dos": {"kind": "isotropic", "edge": 0.0, "c_upper": 1.0, "c_lower": _C2},
    "grid": {"strategy": "quadratic", "n_modes": 150, "delta_omega": DEFAULT_DELTA_OMEGA},
    "run": {"t_end": 100.0},
}
_LORENTZIAN_BASE = {
    "dos": {
        "kind": "lorentzian",
        "center": 0.0,
        "half_width": 1.0,
        "order": 6,
        "gamma_upper": 0.5,
        "gamma_lower": 1.0,
    },
    "grid": {"strategy": "uniform", "n_modes": 150, "low": -20.0, "up": 20.0},
    "run": {"t_end": 20.0},
}

# name -> (base, delta_upper, delta_lower, caption parameters)
_PRESET_TABLE = {
    "fig2": (_ISOTROPIC_BASE, -_U2, 0.0, "C2 = 1.5 C1, d12 = -C2^(2/3), d23 = 0"),
    "fig3a": (_ISOTROPIC_BASE, -2 * _U2, 1 * _U1, "C2 = 1.5 C1, d12 = -2 C2^(2/3), d23 = 1 C1^(2/3)"),
    "fig3b": (_ISOTROPIC_BASE, -2 * _U2, 1 * _U2, "C2 = 1.5 C1, d12 = -2 C2^(2/3), d23 = 1 C2^(2/3)"),
    "fig4a": (_ISOTROPIC_BASE, 1 * _U2, -1 * _U1, "C2 = 1.5 C1, d12 = 1 C2^(2/3), d23 = -1 C1^(2/3)"),
    "fig4b": (_ISOTROPIC_BASE, 2 * _U2, 3 * _U1, "C2 = 1.5 C1, d12 = 2 C2^(2/3), d23 = 3 C1^(2/3)"),
    "fig5a": (_ISOTROPIC_BASE, -2 * _U2, 2 * _U2, "C2 = 1.5 C1, d12 = -2 C2^(2/3), d23 = 2 C2^(2/3)"),
    "fig5b": (_ISOTROPIC_BASE, -2 * _U1, 2 * _U1, "C2 = 1.5 C1, d12 = -2 C1^(2/3), d23 = 2 C1^(2/3)"),
    "fig6": (_ISOTROPIC_BASE, -2 * _U2, 4 * _U2, "C2 = 1.5 C1, d12 = -2 C2^(2/3), d23 = 4 C2^(2/3)"),
    "fig7": (
        _LORENTZIAN_BASE,
        0.1,
        0.3,
        "gamma1 = 0.5 gamma2, Gamma = gamma2, d12 = 0.1 gamma2, d23 = 0.3 gamma2, w_up = -w_low = 20 gamma2",
    ),
}


def preset_names() -> list[str]:
    return list(_PRESET_TABLE)


def preset(name: str) -> dict[str, Any]:
    """Raw scenario mapping for a built-in preset."""
    try:
        base, d12, d23, caption = _PRESET_TABLE[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(_PRESET_TABLE)}") from None
    raw = copy.deepcopy(base)
    raw["atom"] = {"delta_upper": d12, "delta_lower": d23}
    raw["name"] = name
    raw["description"] = caption
    return raw


def list_presets() -> list[dict[str, Any]]:
    """Preset names with their caption parameters and resolved numbers."""
    out = []
    for name in _PRESET_TABLE:
        sc = resolve(preset(name))
        out.append(
            {
                "name": name,
                "description": sc.description,
                "dos": sc.dos["kind"],
                "delta_upper": sc.atom["delta_upper"],
                "delta_lower": sc.atom["delta_lower"],
                "n_modes": sc.grid["n_modes"],
                "t_end": sc.run["t_end"],
                "units": sc.units,
            }
        )
    return out


def load(path) -> dict[str, Any]:
    """Read a scenario mapping from a YAML or JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{path}: top level must be a mapping")
    return raw


@dataclass
class Scenario:
    """Fully resolved scenario; every key has a concrete value."""

    name: str
    description: str
    dos: dict[str, Any]
    grid: dict[str, Any]
    atom: dict[str, Any]
    run: dict[str, Any]
    output: dict[str, Any]

    @property
    def units(self) -> str:
        return UNITS[self.dos["kind"]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "units": self.units,
            "dos": dict(self.dos),
            "grid": dict(self.grid),
            "atom": dict(self.atom),
            "run": dict(self.run),
            "output": dict(self.output),
        }


def _merge(defaults: dict, given: dict, block: str) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ScenarioError(f"unknown keys in {block}: {', '.join(sorted(unknown))}")
    out = dict(defaults)
    out.update(given)
    return out


def _number(block: dict, key: str, block_name: str, positive: bool = False, optional: bool = False):
    value = block.get(key)
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{block_name}.{key} must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ScenarioError(f"{block_name}.{key} must be positive, got {value!r}")
    return float(value)


def _block(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ScenarioError(f"{name} must be a mapping")
    return value


def resolve(raw: dict[str, Any], overrides: dict[str, Any] | None = None) -> Scenario:
    """Fill defaults and check every precondition that does not need a run.

    ``overrides`` accepts ``n_modes``, ``t_end``, ``format``, ``dir`` and
    ``spectra`` from the command line. Changing ``n_modes`` on a quadratic
    grid keeps the band top fixed.
    """
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping")
    unknown = set(raw) - set(BLOCKS) - {"name", "description", "units"}
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    dos_in = dict(_block(raw, "dos"))
    kind = dos_in.pop("kind", None)
    if kind not in DOS_DEFAULTS:
        raise ScenarioError(f"dos.kind must be one of {sorted(DOS_DEFAULTS)}, got {kind!r}")
    dos = _merge(DOS_DEFAULTS[kind], dos_in, "dos")
    dos["kind"] = kind

    atom_in = dict(_block(raw, "atom"))
    ratio = atom_in.pop("coupling_ratio", None)
    atom = _merge({"delta_upper": None, "delta_lower": None}, atom_in, "atom")
    for key in ("delta_upper", "delta_lower"):
        atom[key] = _number(atom, key, "atom")
    if ratio is not None:
        ratio = _number({"coupling_ratio": ratio}, "coupling_ratio", "atom", positive=True)
        if kind == "isotropic":
            dos["c_lower"] = ratio * dos["c_upper"]
        else:
            dos["gamma_upper"] = ratio * dos["gamma_lower"]

    grid_in = dict(_block(raw, "grid"))
    strategy = grid_in.pop("strategy", "quadratic" if kind == "isotropic" else "uniform")
    if strategy not in GRID_DEFAULTS:
        raise ScenarioError(f"grid.strategy must be one of {sorted(GRID_DEFAULTS)}, got {strategy!r}")
    if strategy == "quadratic" and kind != "isotropic":
        raise ScenarioError("the quadratic grid requires dos.kind = isotropic")
    if strategy == "uniform" and kind != "lorentzian":
        raise ScenarioError("the uniform grid requires dos.kind = lorentzian")
    grid = _merge(GRID_DEFAULTS[strategy], grid_in, "grid")
    grid["strategy"] = strategy

    run = _merge(dict(RUN_DEFAULTS["common"], **RUN_DEFAULTS[kind]), _block(raw, "run"), "run")
    output = _merge(OUTPUT_DEFAULTS, _block(raw, "output"), "output")

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "n_modes" in overrides:
        new = overrides["n_modes"]
        if strategy == "quadratic":
            old = grid["n_modes"]
            grid["delta_omega"] = grid["delta_omega"] * (old / new) ** 2
        grid["n_modes"] = new
    if "t_end" in overrides:
        run["t_end"] = overrides["t_end"]
    for key in ("format", "dir", "spectra"):
        if key in overrides:
            output[key] = overrides[key]

    n = grid["n_modes"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise ScenarioError(f"grid.n_modes must be an integer >= 2, got {n!r}")
    if strategy == "quadratic":
        _number(grid, "delta_omega", "grid", positive=True)
    elif strategy == "uniform":
        low = _number(grid, "low", "grid")
        up = _number(grid, "up", "grid")
        if not low < up:
            raise ScenarioError("grid.low must be below grid.up")
    _number(grid, "margin", "grid")
    for key in ("t_end", "rtol", "atol", "norm_tolerance", "transient_end"):
        _number(run, key, "run", positive=True)
    _number(run, "max_step", "run", positive=True, optional=True)
    n_samples = run["n_samples"]
    if isinstance(n_samples, bool) or not isinstance(n_samples, int) or n_samples < 16:
        raise ScenarioError("run.n_samples must be an integer >= 16")
    if not 0 < run["tail_window"] < 1:
        raise ScenarioError("run.tail_window must lie in (0, 1)")
    if run["transient_end"] >= run["t_end"]:
        raise ScenarioError("run.transient_end must be before run.t_end")
    if output["format"] not in ("csv", "structured"):
        raise ScenarioError("output.format must be csv or structured")

    name = raw.get("name") or output.get("name") or "scenario"
    if not isinstance(name, str) or not name or "/" in name:
        raise ScenarioError(f"invalid scenario name {name!r}")
    scenario = Scenario(
        name=name,
        description=str(raw.get("description", "")),
        dos=dos,
        grid=grid,
        atom=atom,
        run=run,
        output=output,
    )
    try:
        make_model(scenario)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return scenario


def make_model(scenario: Scenario) -> DosModel:
    params = {k: v for k, v in scenario.dos.items() if k != "kind"}
    if scenario.dos["kind"] == "isotropic":
        return IsotropicBandEdge(**params)
    return GeneralizedLorentzian(**params)


def build(scenario: Scenario) -> tuple[DosModel, DiscretizedReservoir, LadderConfig]:
    """Model, reservoir (with shifts) and ladder configuration for a scenario."""
    model = make_model(scenario)
    grid = scenario.grid
    d12 = scenario.atom["delta_upper"]
    d23 = scenario.atom["delta_lower"]
    transitions = (model.reference + d12, model.reference + d23)
    try:
        if grid["strategy"] == "quadratic":
            reservoir = build_quadratic_grid(
                model, grid["n_modes"], grid["delta_omega"], transitions=transitions, margin=grid["margin"]
            )
        elif grid["strategy"] == "uniform":
            reservoir = build_uniform_grid(
                model,
                grid["low"],
                grid["up"],
                grid["n_modes"],
                transitions=transitions,
                margin=grid["margin"],
                cutoff=grid["cutoff"],
            )
        else:
            start = grid["start"]
            if start is None:
                start = model.edge if isinstance(model, IsotropicBandEdge) else model.center + 10 * model.half_width
            limit = math.inf if grid["band_limit"] is None else grid["band_limit"]
            reservoir = build_recurrence_grid(
                model,
                start,
                grid["n_modes"],
                rho0=grid["rho0"],
                band_limit=limit,
                transitions=transitions,
                margin=grid["margin"],
                cutoff=grid["cutoff"],
            )
        config = LadderConfig(d12, d23, reservoir)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return model, reservoir, config
