"""INI run configuration: parsing, overrides, serialization.

Physics parameters in ``[coefficients]`` have no defaults; numerics do.
Unknown sections or keys are rejected with the list of valid ones.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

from .coefficients import CoefficientSet, ScalingContext, ValidationReport, validate_parameters
from .errors import InvalidInputError

REQUIRED = object()
AUTO = "auto"

# section -> key -> (kind, default); kind in float|int|floats|ints|str|float_or_auto
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "coefficients": {
        "sigma": ("float", REQUIRED),
        "beta": ("float", REQUIRED),
        "gamma": ("float", REQUIRED),
        "n_exp": ("float", REQUIRED),
        "s_exp": ("float", REQUIRED),
        "M0": ("float", REQUIRED),
        "c_plus": ("float", REQUIRED),
        "c_minus": ("float", REQUIRED),
        "A0": ("float", REQUIRED),
        "A1": ("float", REQUIRED),
        "V0": ("float", REQUIRED),
        "interior_blend_width": ("float", 0.5),
        "lambda_plateau": ("float_or_auto", AUTO),
        "d_plateau": ("float_or_auto", AUTO),
    },
    "scaling": {
        "eps": ("floats", REQUIRED),
        "dim": ("int", 1),
    },
    "grid": {
        "L": ("float", 2 * math.pi),
        "Nx": ("int", 128),
        "Ny": ("int", 160),
        "Y_max": ("float_or_auto", AUTO),
        "dt": ("float_or_auto", AUTO),
        "cfl": ("float", 0.9),
        "transport": ("str", "exact"),
        "v_order": ("int", 16),
        "dt_sde": ("float", 2.5e-4),
    },
    "run": {
        "T": ("float", 0.5),
        "N": ("int", 100_000),
        "seed": ("int", 0),
        "snapshot_every": ("int", 0),
        "rho0_amplitude": ("float", 0.5),
        "rho0_mode": ("int", 1),
        "threads": ("int", 1),
    },
    "experiment": {
        "id": ("str", "E1"),
        "modes": ("ints", (1, 2)),
        "k_fraction": ("float", 0.05),
        "slack": ("float", 1.2),
        "pareto_control": ("float", 1.75),
    },
}

EXPERIMENTS = ("E1", "E2", "E3", "E4")
TRANSPORTS = ("upwind", "muscl", "exact")
MANIFEST_SECTIONS = ("derived", "outputs", "timing")


def valid_keys() -> list[str]:
    return [f"{sec}.{key}" for sec, keys in SCHEMA.items() for key in keys]


def _parse(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            val = float(raw)
            if not val.is_integer():
                raise ValueError(raw)
            return int(val)
        if kind == "floats":
            return tuple(float(t) for t in raw.split(",") if t.strip())
        if kind == "ints":
            return tuple(int(float(t)) for t in raw.split(",") if t.strip())
        if kind == "float_or_auto":
            return AUTO if raw.lower() == AUTO else float(raw)
        return raw
    except ValueError:
        raise InvalidInputError(f"{where}: cannot parse {raw!r} as {kind}") from None


def _format(kind: str, val) -> str:
    if val == AUTO:
        return AUTO
    if kind == "float":
        return repr(float(val))
    if kind == "int":
        return str(int(val))
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in val)
    if kind == "ints":
        return ", ".join(str(int(v)) for v in val)
    if kind == "float_or_auto":
        return repr(float(val))
    return str(val)


@dataclass
class ExperimentConfig:
    values: dict  # section -> key -> parsed value

    def __getitem__(self, dotted: str):
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    # -- derived objects ---------------------------------------------------
    def coefficients(self) -> CoefficientSet:
        c = dict(self.values["coefficients"])
        for k in ("lambda_plateau", "d_plateau"):
            if c[k] == AUTO:
                c[k] = None
        return CoefficientSet(**c)

    @property
    def eps_list(self) -> tuple:
        return self.values["scaling"]["eps"]

    def context(self, eps: float) -> ScalingContext:
        return ScalingContext.build(self.coefficients(), eps, self.values["scaling"]["dim"])

    @property
    def experiment(self) -> str:
        return self.values["experiment"]["id"]

    # -- checks ---------------------------------------------------------------
    def validate(self) -> None:
        v = self.values
        if v["experiment"]["id"] not in EXPERIMENTS:
            raise InvalidInputError(f"experiment.id must be one of {EXPERIMENTS}, got {v['experiment']['id']!r}")
        if v["grid"]["transport"] not in TRANSPORTS:
            raise InvalidInputError(f"grid.transport must be one of {TRANSPORTS}")
        if v["scaling"]["dim"] not in (1, 2):
            raise InvalidInputError("scaling.dim must be 1 or 2")
        if not v["scaling"]["eps"] or any(not e > 0 for e in v["scaling"]["eps"]):
            raise InvalidInputError("scaling.eps must be a non-empty list of positive numbers")
        for key in ("Nx", "Ny"):
            if v["grid"][key] < 8:
                raise InvalidInputError(f"grid.{key} must be >= 8")
        if not v["run"]["T"] > 0:
            raise InvalidInputError("run.T must be > 0")
        if abs(v["run"]["rho0_amplitude"]) >= 1:
            raise InvalidInputError("run.rho0_amplitude must lie in (-1, 1) so that rho0 > 0")
        if v["run"]["seed"] < 0:
            raise InvalidInputError("run.seed must be a nonnegative integer")
        # structural checks; an inadmissible set is a failed check, not bad input
        if self.admissibility().ok:
            self.coefficients()

    def admissibility(self) -> ValidationReport:
        raw = {k: self.values["coefficients"][k] for k in ("sigma", "beta", "gamma", "n_exp", "s_exp")}
        return validate_parameters(raw)

    # -- (de)serialization -------------------------------------------------
    def to_ini(self) -> str:
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for key, (kind, _) in keys.items():
                lines.append(f"{key} = {_format(kind, self.values[sec][key])}")
            lines.append("")
        return "\n".join(lines)

    def with_overrides(self, overrides) -> "ExperimentConfig":
        raw = {sec: {k: _format(SCHEMA[sec][k][0], val) for k, val in keys.items()} for sec, keys in self.values.items()}
        for item in overrides:
            sec, key, text = _split_override(item)
            raw[sec][key] = text
        return _resolve(raw, "override")


def _split_override(item: str) -> tuple[str, str, str]:
    if "=" not in item:
        raise InvalidInputError(f"override {item!r} is not of the form section.key=value")
    lhs, text = item.split("=", 1)
    lhs = lhs.strip()
    if "." not in lhs:
        raise InvalidInputError(f"override key {lhs!r} needs a section prefix; valid keys: {', '.join(valid_keys())}")
    sec, key = lhs.split(".", 1)
    if sec not in SCHEMA or key not in SCHEMA[sec]:
        raise InvalidInputError(f"unknown key {lhs!r}; valid keys: {', '.join(valid_keys())}")
    return sec, key, text


def _resolve(raw: dict, origin: str) -> ExperimentConfig:
    values = {}
    for sec, keys in SCHEMA.items():
        given = raw.get(sec, {})
        values[sec] = {}
        for key, (kind, default) in keys.items():
            if key in given:
                values[sec][key] = _parse(kind, given[key], f"{origin}: {sec}.{key}")
            elif default is REQUIRED:
                raise InvalidInputError(f"{origin}: missing required key {sec}.{key}")
            else:
                values[sec][key] = default
    cfg = ExperimentConfig(values)
    cfg.validate()
    return cfg


def parse_config(text: str, origin: str = "<string>", overrides=()) -> ExperimentConfig:
    """Parse INI text; manifest-only sections are ignored so a manifest is a valid config."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (M0, A1, ...)
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise InvalidInputError(f"{origin}: {exc}") from None
    raw = {}
    for sec in cp.sections():
        if sec in MANIFEST_SECTIONS:
            continue
        if sec not in SCHEMA:
            raise InvalidInputError(f"{origin}: unknown section [{sec}]; valid keys: {', '.join(valid_keys())}")
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise InvalidInputError(f"{origin}: unknown key {sec}.{key}; valid keys: {', '.join(valid_keys())}")
        raw[sec] = dict(cp.items(sec))
    for item in overrides:
        sec, key, txt = _split_override(item)
        raw.setdefault(sec, {})[key] = txt
    return _resolve(raw, origin)


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"config file {path} not found")
    return parse_config(path.read_text(), str(path), overrides)


REFERENCE_INI = """\
[coefficients]
sigma = 1.5
beta = 2.0
gamma = 2.0
n_exp = 2.5
s_exp = 1.3
M0 = 2.0
c_plus = 0.1
c_minus = 0.1
A0 = 1.0
A1 = 1.0
V0 = 1.0

[scaling]
eps = 0.2, 0.1, 0.05
dim = 1

[grid]
Nx = 128
Ny = 160

[run]
T = 0.5

[experiment]
id = E1
"""


def reference_config(overrides=()) -> ExperimentConfig:
    """The reference parameter set (mu = 0.75) with default numerics."""
    return parse_config(REFERENCE_INI, "<reference>", overrides)
