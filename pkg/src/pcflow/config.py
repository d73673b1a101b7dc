"""Run configuration: TOML files, validation and the resolved view used in reports.

A config file is flat keys plus dotted sections::

    dim = 2
    grid = 12

    [data]
    kind = "pluriclosed_rank_one"
    epsilon = 0.05
    b = [[1.0, 0.0], [0.0, 1.0]]    # complex entries as [re, im]

    [flow]
    horizon = 0.2
    probe_times = [0.1]

    [tolerances]
    pluriclosed = 1e-9

    [output]
    dir = "runs/rank-one"

The only environment override is ``PCFLOW_OUTPUT_DIR``, which replaces the
output directory.  Every out-of-range or unknown field raises
:class:`ConfigError` naming the field; nothing is clamped.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field, replace

from .identities import ALL_CASES
from .initial_data import KINDS, DataSpec

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

ENV_OUTPUT_DIR = "PCFLOW_OUTPUT_DIR"

# short names accepted on the command line and in files
KIND_ALIASES = {
    "rank_one": "pluriclosed_rank_one",
    "hs": "hermitian_symplectic",
    "random": "random_hermitian",
}


class ConfigError(ValueError):
    """A configuration field is missing, unknown or out of range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def resolve_kind(kind: str) -> str:
    kind = KIND_ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ConfigError("data.kind", f"unknown kind {kind!r}; expected one of "
                          f"{sorted(set(KINDS) | set(KIND_ALIASES))}")
    return kind


@dataclass(frozen=True)
class RunConfig:
    dim: int = 2
    grid: int = 12
    data: DataSpec = field(default_factory=DataSpec)
    horizon: float = 0.2
    probe_times: tuple[float, ...] = ()
    probe_dt: float = 1e-4
    safety: float = 0.2
    monitor_interval: float | None = None
    dealias: bool = True
    bound: float = 50.0
    suite_probe_time: float = 1e-3
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "pcflow-out"

    def __post_init__(self):
        _check_int("dim", self.dim)
        if self.dim not in (1, 2, 3):
            raise ConfigError("dim", f"must be 1, 2 or 3, got {self.dim}")
        _check_int("grid", self.grid)
        if self.grid % 2 or not 4 <= self.grid <= 64:
            raise ConfigError("grid", f"must be even with 4 <= N <= 64, got {self.grid}")
        _positive("flow.horizon", self.horizon)
        _positive("data.epsilon", self.data.epsilon)
        _positive("flow.probe_dt", self.probe_dt)
        _positive("flow.safety", self.safety)
        _positive("report.bound", self.bound)
        _positive("verify.probe_time", self.suite_probe_time)
        if self.monitor_interval is not None:
            _positive("flow.monitor_interval", self.monitor_interval)
        for tp in self.probe_times:
            if not (isinstance(tp, (int, float)) and 0 < tp < self.horizon):
                raise ConfigError("flow.probe_times",
                                  f"probe time {tp!r} outside (0, horizon={self.horizon})")
        for case, tol in self.tolerances.items():
            if case not in ALL_CASES:
                raise ConfigError(f"tolerances.{case}", "unknown identity case")
            _positive(f"tolerances.{case}", tol)
        for name in ("k", "m", "b"):
            v = getattr(self.data, name)
            if v is not None and len(v) != self.dim:
                raise ConfigError(f"data.{name}", f"needs {self.dim} entries, got {len(v)}")

    def output_path(self) -> str:
        return os.environ.get(ENV_OUTPUT_DIR) or self.output_dir

    def with_overrides(self, **kw) -> "RunConfig":
        """Replace top-level fields or data fields (``data_kind``, ``data_epsilon``, ...)."""
        data_kw = {k[5:]: v for k, v in kw.items() if k.startswith("data_") and v is not None}
        top = {k: v for k, v in kw.items() if not k.startswith("data_") and v is not None}
        if "kind" in data_kw:
            data_kw["kind"] = resolve_kind(data_kw["kind"])
        try:
            data = replace(self.data, **data_kw)
        except ValueError as exc:
            raise ConfigError("data", str(exc)) from exc
        return replace(self, data=data, **top)

    def resolved(self) -> dict:
        """Plain-JSON view with defaults filled in."""
        d = self.data.resolved(self.dim)
        return {
            "dim": self.dim,
            "grid": self.grid,
            "data": {"kind": d.kind, "epsilon": d.epsilon, "k": list(d.k), "m": list(d.m),
                     "b": [[z.real, z.imag] for z in d.b], "seed": d.seed},
            "flow": {"horizon": self.horizon, "probe_times": list(self.probe_times),
                     "probe_dt": self.probe_dt, "safety": self.safety,
                     "monitor_interval": self.monitor_interval, "dealias": self.dealias},
            "report": {"bound": self.bound},
            "verify": {"probe_time": self.suite_probe_time},
            "tolerances": dict(sorted(self.tolerances.items())),
            "output": {"dir": self.output_path()},
        }


def _check_int(name, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, f"must be an integer, got {v!r}")


def _positive(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(name, f"must be a finite number > 0, got {v!r}")


_SECTIONS = {
    "": {"dim", "grid"},
    "data": {"kind", "epsilon", "k", "m", "b", "seed"},
    "flow": {"horizon", "probe_times", "probe_dt", "safety", "monitor_interval", "dealias"},
    "report": {"bound"},
    "verify": {"probe_time"},
    "output": {"dir"},
}


def _complex(name, v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    raise ConfigError(name, f"complex entries are numbers or [re, im] pairs, got {v!r}")


def from_mapping(raw: dict) -> RunConfig:
    """Build a RunConfig from a parsed TOML mapping."""
    for key, value in raw.items():
        if isinstance(value, dict):
            if key == "tolerances":
                continue
            if key not in _SECTIONS:
                raise ConfigError(key, "unknown section")
            for sub in value:
                if sub not in _SECTIONS[key]:
                    raise ConfigError(f"{key}.{sub}", "unknown field")
        elif key not in _SECTIONS[""]:
            raise ConfigError(key, "unknown field")
    data_raw = dict(raw.get("data", {}))
    flow = raw.get("flow", {})
    kw = {}
    if "kind" in data_raw:
        if not isinstance(data_raw["kind"], str):
            raise ConfigError("data.kind", "must be a string")
        data_raw["kind"] = resolve_kind(data_raw["kind"])
    for name in ("k", "m"):
        if name in data_raw:
            v = data_raw[name]
            if not isinstance(v, list) or not all(isinstance(x, int) for x in v):
                raise ConfigError(f"data.{name}", f"must be a list of integers, got {v!r}")
            data_raw[name] = tuple(v)
    if "b" in data_raw:
        if not isinstance(data_raw["b"], list):
            raise ConfigError("data.b", "must be a list")
        data_raw["b"] = tuple(_complex("data.b", x) for x in data_raw["b"])
    if "seed" in data_raw:
        _check_int("data.seed", data_raw["seed"])
    if "epsilon" in data_raw:
        _positive("data.epsilon", data_raw["epsilon"])
    try:
        kw["data"] = DataSpec(**data_raw)
    except ValueError as exc:
        raise ConfigError("data", str(exc)) from exc
    for key in ("dim", "grid"):
        if key in raw:
            kw[key] = raw[key]
    for key in ("horizon", "probe_dt", "safety", "monitor_interval", "dealias"):
        if key in flow:
            kw[key] = flow[key]
    if "dealias" in kw and not isinstance(kw["dealias"], bool):
        raise ConfigError("flow.dealias", "must be true or false")
    if "probe_times" in flow:
        if not isinstance(flow["probe_times"], list):
            raise ConfigError("flow.probe_times", "must be a list")
        kw["probe_times"] = tuple(flow["probe_times"])
    if "bound" in raw.get("report", {}):
        kw["bound"] = raw["report"]["bound"]
    if "probe_time" in raw.get("verify", {}):
        kw["suite_probe_time"] = raw["verify"]["probe_time"]
    if "tolerances" in raw:
        if not isinstance(raw["tolerances"], dict):
            raise ConfigError("tolerances", "must be a section")
        kw["tolerances"] = dict(raw["tolerances"])
    if "dir" in raw.get("output", {}):
        kw["output_dir"] = str(raw["output"]["dir"])
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    return from_mapping(raw)
