"""Scenario configuration: YAML in, validated frozen dataclasses out.

Every section is closed: unknown keys are errors.  The top-level ``seed``
is the single source of randomness and becomes ``laser.rng_seed``.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .attack import AttackWaveform
from .countermeasures import CountermeasureStack, MonitorDetector, PowerMeter, SpectralFilter
from .interferometry import InterferometerConfig
from .laser import DrivePulse, InjectedField, LaserConfig
from .security import KeyRateParams

DEFAULT_SCENARIO = Path(__file__).with_name("data") / "default_scenario.yaml"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AttackRequest:
    """Either a fixed waveform or a request for the planner."""

    mode: str = "plan"
    channel_loss_db: float = 0.0
    lock_spread_target: float = 0.1
    required_power: float | None = None
    repetition_rate: float | None = None
    waveform: AttackWaveform | None = None

    def __post_init__(self):
        if self.mode not in ("plan", "waveform"):
            raise ValueError("attack.mode must be 'plan' or 'waveform'")
        if self.mode == "waveform" and self.waveform is None:
            raise ValueError("attack.waveform is required when mode is 'waveform'")
        if not self.channel_loss_db >= 0:
            raise ValueError("attack.channel_loss_db must be non-negative")
        if not 0 < self.lock_spread_target <= 3.141592653589793:
            raise ValueError("attack.lock_spread_target must lie in (0, pi]")
        if self.required_power is not None and not self.required_power > 0:
            raise ValueError("attack.required_power must be positive")


@dataclass(frozen=True)
class ReproduceConfig:
    fig2_facet_powers: tuple[float, ...] = (0.0, 1e-6, 1e-5, 1e-4, 1e-3)
    fig4_isolation_db: float = 25.0
    fig4_facet_powers: tuple[float, ...] = (0.0, 1e-6, 1e-5, 1e-4, 1e-3)
    fig6_widths: tuple[float, ...] = (50e-12, 100e-12, 200e-12)
    fig6_bandwidths: tuple[float, ...] = (0.5e9, 1e9, 2e9, 5e9, 10e9, 20e9, 40e9)

    def __post_init__(self):
        for name in ("fig2_facet_powers", "fig4_facet_powers", "fig6_widths", "fig6_bandwidths"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if any(p < 0 for p in self.fig2_facet_powers + self.fig4_facet_powers):
            raise ValueError("facet powers must be non-negative")
        if 0.0 not in self.fig4_facet_powers:
            raise ValueError("reproduce.fig4_facet_powers needs a 0 baseline")
        if any(not x > 0 for x in self.fig6_widths + self.fig6_bandwidths):
            raise ValueError("fig6 widths and bandwidths must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    laser: LaserConfig = field(default_factory=LaserConfig)
    injection: InjectedField = field(default_factory=InjectedField)
    interferometer: InterferometerConfig = field(default_factory=InterferometerConfig)
    stack: CountermeasureStack = field(default_factory=CountermeasureStack)
    attack: AttackRequest = field(default_factory=AttackRequest)
    keyrate: KeyRateParams = field(default_factory=KeyRateParams)
    reproduce: ReproduceConfig = field(default_factory=ReproduceConfig)
    n_pulses: int = 25792
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if isinstance(self.n_pulses, bool) or int(self.n_pulses) != self.n_pulses or self.n_pulses < 2:
            raise ValueError("n_pulses must be an integer >= 2")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.laser.rng_seed != self.seed:
            object.__setattr__(self, "laser", replace(self.laser, rng_seed=int(self.seed)))

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, seed=seed, laser=replace(self.laser, rng_seed=seed))

    def digest(self) -> str:
        blob = json.dumps(to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------
# building
# --------------------------------------------------------------------------

def _coerce(value, ftype: str, where: str):
    # PyYAML reads "1e-9" (no dot) as a string; accept it for float fields
    if "float" in ftype and isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if "float" in ftype and "tuple" in ftype and isinstance(value, list):
        return tuple(_coerce(v, "float", where) for v in value)
    if isinstance(value, bool) and ("float" in ftype or ftype == "int"):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return value


def _build(cls, data, section: str, nested: dict[str, Any] | None = None, forbid=()):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected a mapping")
    allowed = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in allowed or key in forbid:
            raise ConfigError(f"{section}: unknown key {key!r}")
    kwargs = {}
    for key, value in data.items():
        if nested and key in nested:
            kwargs[key] = nested[key](value, f"{section}.{key}")
        else:
            kwargs[key] = _coerce(value, str(allowed[key].type), f"{section}.{key}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _optional(cls, nested=None):
    def build(value, section):
        return None if value is None else _build(cls, value, section, nested)
    return build


def _gate(value, section):
    if value is None:
        return None
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(f"{section}: expected [start, duration]")
    return tuple(_coerce(v, "float", section) for v in value)


def _isolators(value, section):
    if not isinstance(value, list):
        raise ConfigError(f"{section}: expected a list of dB values")
    return tuple(_coerce(v, "float", section) for v in value)


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a mapping")
    top = {f.name for f in dataclasses.fields(ScenarioConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(f"top level: unknown key {key!r}")
    seed = data.get("seed", 0)
    laser = _build(LaserConfig, data.get("laser"), "laser",
                   {"drive": lambda v, s: _build(DrivePulse, v, s)}, forbid=("rng_seed",))
    parts = dict(
        laser=laser,
        injection=_build(InjectedField, data.get("injection"), "injection", {"gate": _gate}),
        interferometer=_build(InterferometerConfig, data.get("interferometer"), "interferometer"),
        stack=_build(CountermeasureStack, data.get("stack"), "stack", {
            "isolators": _isolators,
            "filter": _optional(SpectralFilter),
            "power_meter": _optional(PowerMeter),
            "monitor_detector": _optional(MonitorDetector),
        }),
        attack=_build(AttackRequest, data.get("attack"), "attack",
                      {"waveform": _optional(AttackWaveform)}),
        keyrate=_build(KeyRateParams, data.get("keyrate"), "keyrate"),
        reproduce=_build(ReproduceConfig, data.get("reproduce"), "reproduce"),
    )
    for key in ("n_pulses", "seed", "output_dir"):
        if key in data:
            parts[key] = data[key]
    parts["seed"] = seed
    try:
        return ScenarioConfig(**parts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"top level: {exc}") from None


def load_text(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{source}: parse error at {where}: {problem}") from None
    return from_dict(data or {})


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return load_text(path.read_text(), str(path))


# --------------------------------------------------------------------------
# serializing
# --------------------------------------------------------------------------

def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def to_dict(config: ScenarioConfig) -> dict:
    d = _plain(config)
    d["laser"].pop("rng_seed")
    return d


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False)
