"""Run configuration: a versioned YAML schema with path-qualified validation errors."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field

import yaml

from .dyadic import Geometry
from .params import CANONICAL, ParameterSet

SCHEMA_VERSION = 1
ENV_PREFIX = "DUALPAIR_"
MODES = ("theorem", "diagnostic")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


DEFAULTS: dict = {
    "schema": SCHEMA_VERSION,
    "params": CANONICAL.to_dict(),
    "geometry": {
        "x0": [0.0, 0.0],
        "rho0": 0.35,
        "beta": 0.4,
        "alpha": 0.5,
        "chi": 0.25,
        "ball_factor": 3.0,
        "admission": "covering",
        "grid": 32,
        "half_width": 1.0,
    },
    "functions": [{"name": "bump"}, {"name": "trig-random", "seed": 0}],
    "coefficient": {"kind": "none", "c": 1.0},
    "execution": {
        "mode": "diagnostic",
        "seed": 0,
        "threads": 0,
        "mc_samples": 40000,
        "near": 2,
        "lambda_factors": [1.0, 1.05, 1.15, 1.35, 1.7],
        "level_set_points": 8,
        "dim_levels": 4,
        "eps_sweep": [0.05, 0.1, 0.2],
        "C2": 1.0,
        "C3": 1.0,
        "C_a": 1.0,
    },
    "output": {"dir": "dualpair-out", "formats": ["json", "csv"]},
}


@dataclass
class RunConfig:
    params: ParameterSet
    geometry: Geometry
    grid: int
    half_width: float
    functions: list
    coefficient: dict
    execution: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def mode(self) -> str:
        return self.execution["mode"]

    @property
    def threads(self) -> int:
        t = int(self.execution["threads"])
        return (os.cpu_count() or 1) if t == 0 else t


def _merge(base: dict, extra: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if key not in base:
            raise ConfigError(f"{path}{key}", "unknown field")
        if isinstance(base[key], dict) and key != "params":
            if not isinstance(val, dict):
                raise ConfigError(f"{path}{key}", "expected a mapping")
            out[key] = _merge(base[key], val, f"{path}{key}.")
        else:
            out[key] = val
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the YAML file, then ``overrides`` (dotted keys), then validation."""
    raw = copy.deepcopy(DEFAULTS)
    if path:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected a mapping")
        if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError("schema", f"unsupported schema {data.get('schema')!r}, expected {SCHEMA_VERSION}")
        raw = _merge(raw, data, "")
        if "params" in data:
            params = dict(DEFAULTS["params"])
            for key in data["params"]:
                if key not in params:
                    raise ConfigError(f"params.{key}", "unknown field")
            params.update(data["params"])
            raw["params"] = params
    for dotted, val in (overrides or {}).items():
        if val is None:
            continue
        node = raw
        keys = dotted.split(".")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = val
    return validate(raw)


def env_overrides(environ=None) -> dict:
    """Environment variables mirroring the command-line flags."""
    env = os.environ if environ is None else environ
    table = {
        "MODE": ("execution.mode", str),
        "OUT": ("output.dir", str),
        "SEED": ("execution.seed", int),
        "GRID": ("geometry.grid", int),
        "THREADS": ("execution.threads", int),
    }
    out = {}
    for name, (key, cast) in table.items():
        val = env.get(ENV_PREFIX + name)
        if val not in (None, ""):
            try:
                out[key] = cast(val)
            except ValueError as exc:
                raise ConfigError(ENV_PREFIX + name, str(exc)) from None
    return out


def validate(raw: dict) -> RunConfig:
    try:
        params = ParameterSet(**raw["params"])
    except TypeError as exc:
        raise ConfigError("params", str(exc)) from None
    g = raw["geometry"]
    if len(g["x0"]) != params.n:
        raise ConfigError("geometry.x0", f"expected {params.n} coordinates")
    geometry = Geometry(
        tuple(g["x0"]), float(g["rho0"]), float(g["beta"]), float(g["alpha"]),
        None if g["chi"] is None else float(g["chi"]), float(g["ball_factor"]), g["admission"],
    )
    try:
        geometry.validate()
    except ValueError as exc:
        raise ConfigError("geometry", str(exc)) from None
    grid = int(g["grid"])
    if grid < 4 or grid & (grid - 1):
        raise ConfigError("geometry.grid", "must be a power of two >= 4")
    ex = raw["execution"]
    if ex["mode"] not in MODES:
        raise ConfigError("execution.mode", f"must be one of {MODES}")
    if ex["mode"] == "theorem" and geometry.chi is not None:
        raise ConfigError("geometry.chi", "theorem mode needs the faithful geometry (chi: null)")
    if int(ex["threads"]) < 0:
        raise ConfigError("execution.threads", "must be >= 0")
    if not raw["functions"]:
        raise ConfigError("functions", "at least one function is required")
    for i, f in enumerate(raw["functions"]):
        if not isinstance(f, dict) or "name" not in f:
            raise ConfigError(f"functions[{i}]", "expected a mapping with a name")
    if raw["coefficient"]["kind"] not in ("none", "constant"):
        raise ConfigError("coefficient.kind", "must be 'none' or 'constant'")
    fmts = raw["output"]["formats"]
    if any(f not in ("json", "csv") for f in fmts):
        raise ConfigError("output.formats", "allowed formats are json and csv")
    return RunConfig(params, geometry, grid, float(g["half_width"]), list(raw["functions"]),
                     dict(raw["coefficient"]), dict(ex), dict(raw["output"]), raw)
