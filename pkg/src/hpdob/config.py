"""
JSON scenario files.

The document mirrors `ScenarioConfig` field for field. Every key is optional
and falls back to the baseline servo scenario; unknown keys are rejected with
their dotted path. Signal specs and controller modes carry a ``"type"`` tag.

Example::

    {
      "Ts": 1e-4,
      "duration": 2.0,
      "mode": {"type": "hpdob", "order": 1, "g_p": 0.15, "g_o": 0.15},
      "disturbance": {"type": "sum", "terms": [
          {"type": "sine_sum", "terms": [{"amplitude": 5, "frequency": 1, "phase": 0}]},
          {"type": "state_dependent", "coulomb": 0.5}
      ]},
      "reference": {"type": "step", "amplitude": 1.0, "start": 0.0},
      "output_dir": "out/hpdob1"
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, MISSING
from pathlib import Path

from .control import PdGains, PdOnly, PdPlusCdob, PdPlusHpdob
from .plant import PlantPair, ServoParams, State
from .signals import (Constant, Hold, Poly, Ramp, Sine, SineSum, SineTerm, StateDependent,
                      Step, Sum)
from .sim import ConfigError, ScenarioConfig

DISTURBANCE_TYPES = {
    "constant": Constant,
    "ramp": Ramp,
    "poly": Poly,
    "sine_sum": SineSum,
    "state_dependent": StateDependent,
    "sum": Sum,
}
REFERENCE_TYPES = {"step": Step, "sine": Sine, "hold": Hold}
MODE_TYPES = {"pd_only": PdOnly, "cdob": PdPlusCdob, "hpdob": PdPlusHpdob}

_INT_FIELDS = {"substeps", "seed", "order", "damping_sign"}
_STR_FIELDS = {"plant_model", "coeff_mode", "delta_timing"}


@dataclass(frozen=True)
class ConfigFile:
    scenario: ScenarioConfig
    output_dir: str | None = None


def _tag(registry, obj):
    for name, cls in registry.items():
        if type(obj) is cls:
            return name
    raise ConfigError(f"cannot serialize {obj!r}")


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            path = f"{where}.{key}" if where else key
            raise ConfigError(f"unknown key {path!r}")


def _scalar(name, value, where):
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if name in _INT_FIELDS:
        if float(value) != int(value):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: value must be finite")
    return value


def _build(cls, data, where, special=None, base=None):
    """Instantiate a flat dataclass from ``data``, defaults from ``base`` or the class."""
    special = special or {}
    names = [f.name for f in fields(cls) if f.init]
    _check_keys(data, set(names) | {"type"}, where)
    kwargs = {}
    for f in fields(cls):
        if not f.init:
            continue
        path = f"{where}.{f.name}" if where else f.name
        if f.name in data:
            raw = data[f.name]
            kwargs[f.name] = special[f.name](raw, path) if f.name in special else _scalar(f.name, raw, path)
        elif base is not None:
            kwargs[f.name] = getattr(base, f.name)
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(f"missing required key {path!r}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}" if where else str(exc)) from exc


def _list(raw, path, item):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: expected a non-empty list")
    return tuple(item(v, f"{path}[{i}]") for i, v in enumerate(raw))


def _typed(registry, data, where, default_type=None):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    kind = data.get("type", default_type)
    if kind not in registry:
        raise ConfigError(f"{where}.type: expected one of {sorted(registry)}, got {kind!r}")
    return registry[kind]


def parse_disturbance(data, where="disturbance"):
    cls = _typed(DISTURBANCE_TYPES, data, where)
    special = {}
    if cls is Poly:
        special["coefficients"] = lambda raw, p: _list(raw, p, lambda v, q: _scalar("c", v, q))
    elif cls is SineSum:
        special["terms"] = lambda raw, p: _list(raw, p, lambda v, q: _build(SineTerm, v, q))
    elif cls is Sum:
        special["terms"] = lambda raw, p: _list(raw, p, parse_disturbance)
    return _build(cls, data, where, special)


def parse_reference(data, where="reference"):
    return _build(_typed(REFERENCE_TYPES, data, where), data, where)


def parse_mode(data, where="mode"):
    return _build(_typed(MODE_TYPES, data, where, default_type="cdob"), data, where)


def _state_pair(cls_fields, raw, path):
    _check_keys(raw, set(cls_fields), path)
    return tuple(_scalar(name, raw.get(name, 0.0), f"{path}.{name}") for name in cls_fields)


def parse_config(data: dict) -> ConfigFile:
    """Resolve a config document into a validated scenario (fail-closed)."""
    base = ScenarioConfig()

    def pair(raw, path):
        _check_keys(raw, {"true_params", "nominal_params"}, path)
        return PlantPair(
            _build(ServoParams, raw.get("true_params", {}), f"{path}.true_params", base=base.pair.true_params),
            _build(ServoParams, raw.get("nominal_params", {}), f"{path}.nominal_params",
                   base=base.pair.nominal_params),
        )

    special = {
        "pair": pair,
        "mode": parse_mode,
        "pd": lambda raw, p: _build(PdGains, raw, p, base=base.pd),
        "disturbance": parse_disturbance,
        "reference": parse_reference,
        "initial_state": lambda raw, p: State(*_state_pair(("q", "qdot"), raw, p)),
        "noise_std": lambda raw, p: _state_pair(("q", "qdot"), raw, p),
        "torque_limit": lambda raw, p: None if raw is None else _scalar("torque_limit", raw, p),
    }
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at top level")
    output_dir = data.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string")
    body = {k: v for k, v in data.items() if k != "output_dir"}
    if "type" in body:
        raise ConfigError("unknown key 'type'")
    return ConfigFile(_build(ScenarioConfig, body, "", special, base=base), output_dir)


def _dump_signal(registry, obj):
    out = {"type": _tag(registry, obj)}
    for f in fields(obj):
        if not f.init:
            continue
        value = getattr(obj, f.name)
        if isinstance(obj, SineSum) and f.name == "terms":
            value = [{"amplitude": s.amplitude, "frequency": s.frequency, "phase": s.phase} for s in value]
        elif isinstance(obj, Sum) and f.name == "terms":
            value = [_dump_signal(DISTURBANCE_TYPES, s) for s in value]
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out


def _servo(p: ServoParams):
    return {"J": p.J, "b": p.b, "damping_sign": p.damping_sign}


def config_to_dict(cfg: ScenarioConfig, output_dir: str | None = None) -> dict:
    out = {
        "pair": {"true_params": _servo(cfg.pair.true_params),
                 "nominal_params": _servo(cfg.pair.nominal_params)},
        "Ts": cfg.Ts,
        "duration": cfg.duration,
        "substeps": cfg.substeps,
        "mode": _dump_signal(MODE_TYPES, cfg.mode),
        "pd": {"Kp": cfg.pd.Kp, "Kd": cfg.pd.Kd},
        "disturbance": _dump_signal(DISTURBANCE_TYPES, cfg.disturbance),
        "reference": _dump_signal(REFERENCE_TYPES, cfg.reference),
        "initial_state": {"q": cfg.initial_state[0], "qdot": cfg.initial_state[1]},
        "noise_std": {"q": cfg.noise_std[0], "qdot": cfg.noise_std[1]},
        "seed": cfg.seed,
        "plant_model": cfg.plant_model,
        "torque_limit": cfg.torque_limit,
        "settle_fraction": cfg.settle_fraction,
    }
    if output_dir is not None:
        out["output_dir"] = output_dir
    return out


def loads_config(text: str, source: str = "<string>") -> ConfigFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ConfigFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return loads_config(text, str(path))


def dump_config(cfg: ScenarioConfig, path, output_dir: str | None = None):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg, output_dir), fh, indent=2)
        fh.write("\n")
