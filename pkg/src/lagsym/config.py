"""Dataclass configs for simulation runs, loaded from JSON."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import sympy as sp

from .expr import ExprError
from .model import ModelSpec
from .symmetry import Generator, entry


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    N: int = 400
    S: float = 1.0
    boundary: str = "periodic"


@dataclass(frozen=True)
class ICConfig:
    kind: str = "gaussian"
    strain: float = 1.0
    velocity: float = 0.0
    amplitude: float = 0.05
    center: float | None = None
    width: float = 0.08
    mode: int = 1
    phi: str | None = None
    phi_t: str | None = None


@dataclass(frozen=True)
class MonitorConfig:
    """A catalog generator (by name, from the model's entry) or an inline one."""

    name: str
    generator: str | None = None
    xi_t: str = "0"
    xi_s: str = "0"
    eta: str = "0"


@dataclass(frozen=True)
class OutputConfig:
    monitors_csv: str = "monitors.csv"
    fields_csv: str | None = None
    snapshot_steps: tuple = ()


@dataclass(frozen=True)
class SimConfig:
    entry: str | None
    model_json: dict | None
    params: dict
    grid: GridConfig = field(default_factory=GridConfig)
    ic: ICConfig = field(default_factory=ICConfig)
    monitors: tuple = ()
    t_end: float = 1.0
    dt: float | None = None
    cfl: float = 0.5
    scheme: str = "flux"
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- model ----------------------------------------------------------
    def base_model(self) -> ModelSpec:
        if self.entry is not None:
            return entry(self.entry).model
        return ModelSpec.from_json(self.model_json)

    def model(self) -> ModelSpec:
        base = self.base_model()
        missing = [k for k in base.domain if k not in self.params]
        if missing:
            raise ConfigError(f"parameters {missing} need numeric values under 'params'")
        for k, v in self.params.items():
            if k not in base.domain:
                raise ConfigError(f"unknown parameter {k!r}")
            if not base.domain[k].admits(sp.Rational(v)):
                raise ConfigError(f"{k} = {v} lies outside the parameter domain")
        return base.specialize(self.params)

    def generators(self):
        """Monitor generators with parameters bound to the run values."""
        base = self.base_model()
        m = self.model()
        binding = {base.domain.symbol(k): sp.Rational(v) for k, v in self.params.items()}
        out = []
        for mon in self.monitors:
            if mon.generator is not None:
                if self.entry is None:
                    raise ConfigError(f"monitor {mon.name!r} names a catalog generator but the model is inline")
                X = entry(self.entry).generator(mon.generator)
                for k, v in X.when:
                    if k not in self.params or sp.Rational(self.params[k]) != v:
                        raise ConfigError(f"generator {mon.generator} needs {k} = {v}")
                X = X.subs(binding)
            else:
                coeffs = [base.parse(c).subs(binding) for c in (mon.xi_t, mon.xi_s, mon.eta)]
                X = Generator(mon.name, *coeffs)
            out.append((mon.name, Generator(X.name, X.xi_t, X.xi_s, X.eta, m.domain, (), X.citation)))
        return out


def _pick(cls, obj, what):
    if obj is None:
        return cls()
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} must be an object")
    known = set(cls.__dataclass_fields__)
    extra = set(obj) - known
    if extra:
        raise ConfigError(f"unknown {what} keys {sorted(extra)}")
    return cls(**obj)


def config_from_json(obj) -> SimConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    model = obj.get("model")
    if not isinstance(model, dict):
        raise ConfigError("config needs a 'model' object")
    entry_name = model.get("entry")
    spec = model.get("spec")
    if (entry_name is None) == (spec is None):
        raise ConfigError("model needs exactly one of 'entry' or 'spec'")
    params = {k: str(v) for k, v in model.get("params", {}).items()}
    out = obj.get("output", {}) or {}
    if "snapshot_steps" in out:
        out = {**out, "snapshot_steps": tuple(int(k) for k in out["snapshot_steps"])}
    try:
        return SimConfig(
            entry=entry_name,
            model_json=spec,
            params=params,
            grid=_pick(GridConfig, obj.get("grid"), "grid"),
            ic=_pick(ICConfig, obj.get("ic"), "ic"),
            monitors=tuple(_pick(MonitorConfig, m, "monitor") for m in obj.get("monitors", [])),
            t_end=float(obj.get("t_end", 1.0)),
            dt=None if obj.get("dt") is None else float(obj["dt"]),
            cfl=float(obj.get("cfl", 0.5)),
            scheme=obj.get("scheme", "flux"),
            output=_pick(OutputConfig, out, "output"),
        )
    except (TypeError, ExprError) as err:
        raise ConfigError(str(err)) from err


def load_config(path) -> SimConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from err
    return config_from_json(obj)
