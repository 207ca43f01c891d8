"""Run configuration: INI-style sections of key = value pairs, validated before any computation."""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .model import FhnParams, Grid

OUTPUT_ENV = "FHNLAB_OUTPUT"
DEFAULT_OUTPUT = "fhnlab-output"


class ConfigError(ValueError):
    """Invalid, unknown or out-of-range configuration entry."""


# section -> key -> (type, default); "auto" is accepted where the default is "auto"
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "model": {"mu": (float, 0.3), "gamma": (float, 0.05), "epsilon": (float, 0.002), "regime": (str, "oscillatory")},
    "grid": {"period": (float, 60.0), "n": (int, 128), "cells": (int, 64)},
    "wave": {"tol": (float, 1e-11), "seed": (int, 0), "seed_time": (float, 1500.0), "seed_dt": (float, 0.05)},
    "family": {"r0": (float, 0.05), "n_k": (int, 5), "tol": (float, 1e-11)},
    "spectral": {"n_modes": (int, 64), "n_xi": (int, 128), "curve_points": (int, 41), "xi0": (str, "auto"),
                 "zero_tol": (float, 1e-8)},
    "floquet": {"hf_cells": (int, 1), "hf_points": (int, 4096), "hf_slope_points": (int, 9),
                "bromwich_radii": (str, "10 30 100 300 1000 3000")},
    "semigroup": {"t_end": (float, 1000.0), "dt": (float, 0.05), "seed": (int, 3), "samples": (int, 24)},
    "simulation": {"t_end": (float, 500.0), "dt": (float, 0.05), "stride": (int, 10),
                   "kind": (str, "random-bounded"), "amplitude": (float, 0.01), "seed": (int, 1),
                   "v_weight": (str, "auto"), "guard": (float, 0.5), "picard_tol": (float, 1e-8),
                   "picard_max_iters": (int, 40), "linear_amplitude": (float, 1e-6),
                   "linear_t_end": (float, 300.0), "residual_time": (float, 50.0)},
    "fits": {"window_start": (float, 10.0), "semigroup_window_end": (float, 1000.0),
             "hamjac_window_start": (float, 50.0)},
    "output": {"dir": (str, "")},
}

POSITIVE = {
    ("model", "epsilon"), ("grid", "period"), ("grid", "n"), ("grid", "cells"), ("wave", "tol"),
    ("wave", "seed_time"), ("wave", "seed_dt"), ("family", "r0"), ("family", "tol"), ("spectral", "n_modes"),
    ("spectral", "n_xi"), ("spectral", "curve_points"), ("spectral", "zero_tol"), ("floquet", "hf_cells"),
    ("floquet", "hf_points"), ("floquet", "hf_slope_points"), ("semigroup", "t_end"), ("semigroup", "dt"),
    ("semigroup", "samples"), ("simulation", "t_end"), ("simulation", "dt"), ("simulation", "stride"),
    ("simulation", "amplitude"), ("simulation", "guard"), ("simulation", "picard_tol"),
    ("simulation", "picard_max_iters"), ("simulation", "linear_amplitude"), ("simulation", "linear_t_end"),
    ("simulation", "residual_time"), ("fits", "window_start"), ("fits", "semigroup_window_end"),
    ("fits", "hamjac_window_start"),
}


def default_config_text() -> str:
    return resources.files("fhnlab").joinpath("default.cfg").read_text()


@dataclass
class RunConfig:
    values: dict
    output_dir: Path
    source: str = "<defaults>"
    extras: dict = field(default_factory=dict)

    @property
    def params(self) -> FhnParams:
        m = self.values["model"]
        return FhnParams(m["mu"], m["gamma"], m["epsilon"], m["regime"])

    @property
    def grid(self) -> Grid:
        g = self.values["grid"]
        return Grid(g["n"], g["period"], g["cells"])

    def section(self, name: str) -> dict:
        return dict(self.values[name])

    def canonical(self, *items: str) -> str:
        """Canonical text of the named sections or ``section.key`` entries; output paths never enter."""
        sel: dict = {}
        for item in items:
            section, _, key = item.partition(".")
            if section == "output":
                continue
            keys = [key] if key else list(self.values[section])
            for k in keys:
                sel.setdefault(section, {})[k] = self.values[section][k]
        return json.dumps(sel, sort_keys=True, separators=(",", ":"))

    def key(self, stage: str, *items: str, upstream: tuple = ()) -> str:
        text = stage + "|" + self.canonical(*items) + "|" + ",".join(upstream)
        return f"{stage}-{hashlib.sha256(text.encode()).hexdigest()[:24]}"

    def as_dict(self) -> dict:
        return {s: dict(v) for s, v in self.values.items()}


def _coerce(section: str, key: str, raw: str):
    typ, _ = SCHEMA[section][key]
    raw = raw.strip()
    if typ is str:
        return raw
    try:
        if typ is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {typ.__name__}") from exc


def parse_config(text: str, source: str = "<string>", overrides: dict | None = None,
                 output_dir: str | None = None) -> RunConfig:
    """Parse, complete with defaults, and validate.  Unknown sections or keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[section][key] = _coerce(section, key, raw)
    for dotted, raw in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown override {dotted!r}")
        values[section][key] = _coerce(section, key, str(raw))
    _validate(values)
    out = output_dir or values["output"]["dir"] or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    out_path = Path(out)
    _check_writable(out_path)
    return RunConfig(values, out_path, source)


def load_config(path: str | None = None, overrides: dict | None = None, output_dir: str | None = None) -> RunConfig:
    if path is None:
        return parse_config(default_config_text(), "<defaults>", overrides, output_dir)
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(p.read_text(), str(p), overrides, output_dir)


def _validate(values: dict) -> None:
    for section, key in POSITIVE:
        if not values[section][key] > 0:
            raise ConfigError(f"[{section}] {key} must be positive, got {values[section][key]!r}")
    m = values["model"]
    try:
        FhnParams(m["mu"], m["gamma"], m["epsilon"], m["regime"])
        g = values["grid"]
        Grid(g["n"], g["period"], g["cells"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    xi0 = values["spectral"]["xi0"]
    if xi0 != "auto":
        try:
            if not float(xi0) > 0:
                raise ValueError
        except ValueError as exc:
            raise ConfigError("[spectral] xi0 must be 'auto' or a positive number") from exc
    vw = values["simulation"]["v_weight"]
    if vw != "auto":
        try:
            if not float(vw) >= 0:
                raise ValueError
        except ValueError as exc:
            raise ConfigError("[simulation] v_weight must be 'auto' or a nonnegative number") from exc
    if values["simulation"]["kind"] not in ("localized", "co-periodic", "quasiperiodic", "random-bounded"):
        raise ConfigError(f"[simulation] unknown perturbation kind {values['simulation']['kind']!r}")
    if values["family"]["n_k"] < 5 or values["family"]["n_k"] % 2 == 0:
        raise ConfigError("[family] n_k must be odd and at least 5")
    if values["spectral"]["n_modes"] < 32:
        raise ConfigError("[spectral] n_modes must be at least 32")
    try:
        radii = [float(r) for r in values["floquet"]["bromwich_radii"].split()]
    except ValueError as exc:
        raise ConfigError("[floquet] bromwich_radii must be a list of numbers") from exc
    if not radii or any(r <= 0 for r in radii):
        raise ConfigError("[floquet] bromwich_radii must be positive")


def _check_writable(path: Path) -> None:
    probe = path
    while not probe.exists():
        if probe.parent == probe:
            break
        probe = probe.parent
    if probe.exists() and not os.access(probe, os.W_OK):
        raise ConfigError(f"output location {path} is not writable")
