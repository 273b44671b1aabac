"""Scenario configuration: JSON schema, defaults and validation.

A config file is a JSON object. Only ``scenario`` is required::

    {
      "scenario": "table2",          # table1 | table2 | rabi-scan | phase-trace |
                                     # motional-map | temperature-sweep | convergence
      "seed": 0,
      "output_dir": "out",
      "model": "effective",          # effective | full
      "dt": 5e-4,                    # µs
      "max_iters": 200,
      "samples": 10000,
      "gate": "table2",              # which gate the non-optimising scenarios use
      "params": {"omega0": 49, "omegaB": 28, "delta_big": 500, "delta_small": 0,
                 "shape": "flattop", "tau": 0.3, "t_total": 2.0},
      "system": {"separation": 3.0, "c3": 3200, "gamma_i": 5.75, "gamma_r": 0.0048},
      "bounds": {"omega0": [1, 400], "tau": [0.2, 0.4]},
      "active": ["omega0", "omegaB", "delta_big", "delta_small"],
      "grid": 21,
      "temperatures": [5, 15, 30, 45, 60, 75],
      "rabi_duration": 6.0,
      "dts": [4e-4, 2e-4, 1e-4, 5e-5, 2.5e-5],
      "rk_dt": 2.5e-6
    }

``params``, ``system`` and ``bounds`` are merged key by key over the
scenario defaults. Frequencies are in 2π·MHz, times in µs, lengths in µm.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .core import (
    PARAMETER_NAMES,
    TABLE1_INITIAL,
    TABLE1_OPTIMISED,
    TABLE1_SYSTEM,
    TABLE2_INITIAL,
    TABLE2_REPRODUCED,
    TABLE2_SYSTEM,
    InvalidParameterError,
    Model,
    PulseParams,
    Shape,
    SystemConfig,
)
from .optimizer import ParameterBounds

SCENARIOS = (
    "table1",
    "table2",
    "rabi-scan",
    "phase-trace",
    "motional-map",
    "temperature-sweep",
    "convergence",
)
GATES = ("table1", "table2")

_TOP_KEYS = {
    "scenario", "seed", "output_dir", "model", "dt", "max_iters", "samples", "gate", "params",
    "system", "bounds", "active", "grid", "temperatures", "rabi_duration", "dts", "rk_dt",
}
_PARAM_KEYS = set(PARAMETER_NAMES) | {"shape", "tau", "t_total"}
_SYSTEM_KEYS = {"separation", "c3", "gamma_i", "gamma_r"}


class ConfigError(Exception):
    """Base class of configuration problems (CLI exit status 2)."""


class ConfigParseError(ConfigError):
    """The file is missing, empty or not a JSON object."""


class ConfigValidationError(ConfigError):
    """A field is unknown, mistyped or violates an invariant."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved inputs of one scenario run."""

    scenario: str
    params: PulseParams
    system: SystemConfig
    model: Model
    dt: float
    seed: int = 0
    output_dir: str = "out"
    max_iters: int = 100
    samples: int = 10000
    gate: str = "table1"
    bounds: ParameterBounds = field(default_factory=ParameterBounds)
    active: tuple[str, ...] = PARAMETER_NAMES
    grid: int = 21
    temperatures: tuple[float, ...] = (5.0, 15.0, 30.0, 45.0, 60.0, 75.0)
    rabi_duration: float = 6.0
    dts: tuple[float, ...] = (4e-4, 2e-4, 1e-4, 5e-5, 2.5e-5)
    rk_dt: float = 2.5e-6

    @property
    def bounded(self) -> bool:
        return bool(self.bounds.limits) or self.bounds.tau is not None

    def to_dict(self) -> dict:
        """JSON-ready record of every input, suitable for re-running."""
        params = asdict(self.params)
        params["shape"] = self.params.shape.value
        system = asdict(self.system)
        bounds = {k: list(v) for k, v in self.bounds.limits.items()}
        if self.bounds.tau is not None:
            bounds["tau"] = list(self.bounds.tau)
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "model": self.model.value,
            "dt": self.dt,
            "max_iters": self.max_iters,
            "samples": self.samples,
            "gate": self.gate,
            "params": params,
            "system": {k: system[k] for k in sorted(_SYSTEM_KEYS)},
            "bounds": bounds,
            "active": list(self.active),
            "grid": self.grid,
            "temperatures": list(self.temperatures),
            "rabi_duration": self.rabi_duration,
            "dts": list(self.dts),
            "rk_dt": self.rk_dt,
        }


def gate_defaults(gate: str, optimised: bool):
    """``(params, system, dt)`` of a reference gate."""
    if gate == "table1":
        return (TABLE1_OPTIMISED if optimised else TABLE1_INITIAL), TABLE1_SYSTEM, 1e-4
    return (TABLE2_REPRODUCED if optimised else TABLE2_INITIAL), TABLE2_SYSTEM, 5e-4


def _defaults(scenario: str, gate: str | None) -> dict:
    if scenario == "table1":
        gate, optimised = "table1", False
    elif scenario == "table2":
        gate, optimised = "table2", False
    else:
        gate = gate or ("table1" if scenario in ("phase-trace", "convergence") else "table2")
        optimised = True
    params, system, dt = gate_defaults(gate, optimised)
    out = {
        "gate": gate,
        "params": params,
        "system": system,
        "dt": dt,
        "bounds": ParameterBounds.experimental() if scenario == "table2" else ParameterBounds.unbounded(),
        "active": ("omega0", "omegaB", "delta_big") if scenario == "table1" else PARAMETER_NAMES,
        "max_iters": 100 if scenario == "table1" else 400,
    }
    return out


def _number(name: str, value: Any, integer: bool = False, positive: bool = False, allow_zero: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(name, f"expected a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigValidationError(name, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigValidationError(name, "must be finite")
    if positive and not (value > 0 or (allow_zero and value == 0)):
        raise ConfigValidationError(name, f"must be {'non-negative' if allow_zero else 'positive'}, got {value}")
    return int(value) if integer else float(value)


def _mapping(name: str, value: Any, allowed: set[str]) -> dict:
    if not isinstance(value, dict):
        raise ConfigValidationError(name, "expected a JSON object")
    for key in value:
        if key not in allowed:
            raise ConfigValidationError(f"{name}.{key}", "unknown field")
    return value


def _number_list(name: str, value: Any, minimum: int, allow_zero: bool = False) -> tuple[float, ...]:
    if not isinstance(value, list) or len(value) < minimum:
        raise ConfigValidationError(name, f"expected a list of at least {minimum} numbers")
    return tuple(_number(f"{name}[{k}]", v, positive=True, allow_zero=allow_zero) for k, v in enumerate(value))


def _grid(value) -> int:
    n = _number("grid", value, integer=True, positive=True)
    if n < 2:
        raise ConfigValidationError("grid", f"needs at least 2 points per axis, got {n}")
    return n


def validate(raw: dict, cli_overrides: dict | None = None) -> ScenarioConfig:
    """Resolve a raw config mapping into a :class:`ScenarioConfig`.

    ``cli_overrides`` (already typed) win over the file.
    """
    if not isinstance(raw, dict):
        raise ConfigParseError("config must be a JSON object")
    raw = dict(raw)
    raw.update({k: v for k, v in (cli_overrides or {}).items() if v is not None})
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigValidationError(key, "unknown field")
    scenario = raw.get("scenario")
    if scenario is None:
        raise ConfigValidationError("scenario", "required")
    if scenario not in SCENARIOS:
        raise ConfigValidationError("scenario", f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")

    gate = raw.get("gate")
    if gate is not None and gate not in GATES:
        raise ConfigValidationError("gate", f"expected one of {', '.join(GATES)}, got {gate!r}")
    if gate is not None and scenario in ("table1", "table2") and gate != scenario:
        raise ConfigValidationError("gate", f"the {scenario} scenario always uses its own gate")
    base = _defaults(scenario, gate)

    try:
        model = Model(raw.get("model", "effective"))
    except ValueError:
        raise ConfigValidationError("model", f"expected 'effective' or 'full', got {raw.get('model')!r}") from None

    p_over = _mapping("params", raw.get("params", {}), _PARAM_KEYS)
    p_fields = asdict(base["params"])
    for key, value in p_over.items():
        if key == "shape":
            try:
                p_fields["shape"] = Shape(value)
            except ValueError:
                raise ConfigValidationError("params.shape", f"expected 'gaussian' or 'flattop', got {value!r}") from None
        else:
            p_fields[key] = _number(f"params.{key}", value)
    try:
        params = PulseParams(**p_fields)
    except InvalidParameterError as exc:
        raise ConfigValidationError("params", str(exc)) from None

    s_over = _mapping("system", raw.get("system", {}), _SYSTEM_KEYS)
    s_fields = asdict(base["system"])
    for key, value in s_over.items():
        s_fields[key] = _number(f"system.{key}", value)
    try:
        system = SystemConfig(**s_fields)
    except InvalidParameterError as exc:
        raise ConfigValidationError("system", str(exc)) from None

    bounds = base["bounds"]
    if "bounds" in raw:
        b_over = _mapping("bounds", raw["bounds"], set(PARAMETER_NAMES) | {"tau"})
        limits = dict(bounds.limits)
        tau = bounds.tau
        for key, value in b_over.items():
            if value is None:
                if key == "tau":
                    tau = None
                else:
                    limits.pop(key, None)
                continue
            if not isinstance(value, list) or len(value) != 2:
                raise ConfigValidationError(f"bounds.{key}", "expected [min, max] or null")
            pair = (_number(f"bounds.{key}[0]", value[0]), _number(f"bounds.{key}[1]", value[1]))
            if key == "tau":
                tau = pair
            else:
                limits[key] = pair
        try:
            bounds = ParameterBounds(limits, tau)
        except InvalidParameterError as exc:
            raise ConfigValidationError("bounds", str(exc)) from None
    if scenario in ("table1", "table2"):
        try:
            bounds.check(params)
        except InvalidParameterError as exc:
            name = str(exc).split("=", 1)[0]
            raise ConfigValidationError(f"params.{name}", str(exc)) from None

    active = base["active"]
    if "active" in raw:
        value = raw["active"]
        if not isinstance(value, list) or not value:
            raise ConfigValidationError("active", "expected a non-empty list of parameter names")
        for name in value:
            if name not in PARAMETER_NAMES:
                raise ConfigValidationError("active", f"unknown parameter {name!r}")
        active = tuple(dict.fromkeys(value))

    seed = _number("seed", raw.get("seed", 0), integer=True, positive=True, allow_zero=True)
    if seed >= 2**64:
        raise ConfigValidationError("seed", "must fit in an unsigned 64-bit integer")
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigValidationError("output_dir", "expected a non-empty path string")

    kwargs = {}
    if "temperatures" in raw:
        kwargs["temperatures"] = _number_list("temperatures", raw["temperatures"], 3, allow_zero=True)
    if "dts" in raw:
        kwargs["dts"] = _number_list("dts", raw["dts"], 2)
    for key in ("rabi_duration", "rk_dt"):
        if key in raw:
            kwargs[key] = _number(key, raw[key], positive=True)

    return ScenarioConfig(
        scenario=scenario,
        params=params,
        system=system,
        model=model,
        dt=_number("dt", raw.get("dt", base["dt"]), positive=True),
        seed=seed,
        output_dir=output_dir,
        max_iters=_number("max_iters", raw.get("max_iters", base["max_iters"]), integer=True, positive=True, allow_zero=True),
        samples=_number("samples", raw.get("samples", 10000), integer=True, positive=True),
        gate=base["gate"],
        bounds=bounds,
        active=active,
        grid=_grid(raw.get("grid", 21)),
        **kwargs,
    )


def load_config(path: str | Path, cli_overrides: dict | None = None) -> ScenarioConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from None
    if not text.strip():
        raise ConfigParseError(f"{path} is empty")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigParseError(f"{path}: top level must be a JSON object")
    return validate(raw, cli_overrides)
