"""Experiment configuration: a flat ``key = value`` text file.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
List-valued keys take comma-separated values. Omitted keys keep their
defaults, which reproduce the reference parameter table. ``theta_rise`` and
``theta_fall`` are per-input coefficients: the neuron uses them multiplied by
``n_inputs``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import re
import types
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dendrite import KernelParams
from .network import InhibitParams, NetworkParams
from .soma import NeuronParams, validate_params
from .stimulus import ConfigurationError, NoiseSpec

log = logging.getLogger(__name__)


class ConfigError(ConfigurationError):
    """Bad configuration file or value."""


@dataclass(frozen=True)
class ExperimentConfig:
    # kernel / soma / inhibition
    ddr: int = 1
    w: int = 10000
    dr_init_base: int = 100
    dr_init_spread: int = 100
    dr_max: int = 400
    dr_floor: int = 1
    clamp_peak: bool = True
    theta_rise: int = 40
    theta_fall: int = 100
    theta_init: int | str = "auto"
    inh_max: int = 100
    inh_decay: int = 1
    T: int = 400
    # topology
    n_inputs: int = 2
    n_neurons: int = 2
    n_patterns: int = 2
    PW: int = 20
    min_separation: int = 3
    # noise
    jitter_sigma: float = 0.0
    p_signal: float = 1.0
    poisson_rate: float = 0.0
    # schedule
    n_presentations: int = 800
    isi: int = 0
    p_x: float = 0.5
    # run control
    seed: int = 0
    runs: int = 200
    convergence_window: int = 20
    width_window: int = 50
    rf_theta_mode: str = "frozen"
    stop_on_convergence: bool = True
    # sweeps used by the presets
    p_x_grid: tuple[float, ...] = (0.5, 0.6, 0.7, 0.85, 1.0)
    sigmas: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0, 2.0, 3.0)
    snrs: tuple[str, ...] = ("1:0", "1:1", "1:2")
    input_grid: tuple[int, ...] = (2, 4, 8)
    neuron_grid: tuple[int, ...] = (2, 3, 4)
    pw_grid: tuple[int, ...] = (20, 40)
    out: str = "out"

    def __post_init__(self):
        positive = ["ddr", "w", "dr_init_base", "dr_max", "dr_floor", "theta_rise", "theta_fall",
                    "inh_max", "inh_decay", "T", "n_inputs", "n_neurons", "n_patterns", "PW",
                    "n_presentations", "runs", "convergence_window", "width_window"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("dr_init_spread", "min_separation", "jitter_sigma", "poisson_rate", "seed"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0 <= self.p_signal <= 1 or not 0 <= self.p_x <= 1:
            raise ConfigError("probabilities must lie in [0, 1]")
        if self.T <= self.PW:
            raise ConfigError(f"T={self.T} must exceed PW={self.PW}")
        if self.dr_max > self.w:
            raise ConfigError(f"dr_max={self.dr_max} must not exceed w={self.w}")
        if self.dr_init_base + self.dr_init_spread - 1 > self.dr_max:
            log.info("initial step sizes may exceed dr_max and will be clamped on first adaptation")
        if isinstance(self.theta_init, str) and self.theta_init != "auto":
            raise ConfigError(f"theta_init must be an integer or 'auto', got {self.theta_init!r}")
        if isinstance(self.theta_init, int) and self.theta_init < 0:
            raise ConfigError("theta_init must be non-negative")
        if self.rf_theta_mode not in ("frozen", "evolving"):
            raise ConfigError(f"rf_theta_mode must be 'frozen' or 'evolving'")
        for snr in self.snrs:
            parse_snr(snr)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def kernel_params(self) -> KernelParams:
        return KernelParams(self.w, self.ddr, self.dr_max, self.dr_floor, self.clamp_peak)

    def initial_theta(self, n_inputs: int | None = None) -> int:
        n = self.n_inputs if n_inputs is None else n_inputs
        if self.theta_init == "auto":
            return 3 * n * self.w // 4
        return int(self.theta_init)

    def neuron_params(self, n_inputs: int | None = None) -> NeuronParams:
        n = self.n_inputs if n_inputs is None else n_inputs
        return NeuronParams(self.kernel_params(), self.theta_rise * n, self.theta_fall * n,
                            self.initial_theta(n))

    def network_params(self, n_inputs: int | None = None, gated: bool = True) -> NetworkParams:
        return NetworkParams(self.neuron_params(n_inputs),
                             InhibitParams(self.inh_max, self.inh_decay), gated)

    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.jitter_sigma, self.p_signal, self.poisson_rate)

    def warnings(self, pw: int | None = None) -> list[str]:
        return validate_params(self.neuron_params(), self.PW if pw is None else pw)

    def canonical(self) -> str:
        """Stable text form used for hashing; excludes the output location."""
        lines = []
        for f in fields(self):
            if f.name == "out":
                continue
            lines.append(f"{f.name}={format_value(getattr(self, f.name))}")
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def dumps(self) -> str:
        return "\n".join(f"{f.name} = {format_value(getattr(self, f.name))}" for f in fields(self)) + "\n"


def parse_snr(text: str) -> tuple[float, float]:
    m = re.fullmatch(r"\s*([0-9.]+)\s*:\s*([0-9.]+)\s*", str(text))
    if not m:
        raise ConfigError(f"bad signal:noise ratio {text!r}")
    s, n = float(m.group(1)), float(m.group(2))
    if s <= 0:
        raise ConfigError(f"signal part of {text!r} must be positive")
    return s, n


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(format_value(x) for x in v)
    return str(v)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_HINTS = typing.get_type_hints(ExperimentConfig)


def _coerce_scalar(kind, text: str, key: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


def coerce(key: str, text: str):
    """Convert the textual value of ``key`` to the field's type."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    hint = _HINTS[key]
    origin = typing.get_origin(hint)
    if origin is tuple:
        kind = typing.get_args(hint)[0]
        parts = [p for p in text.split(",") if p.strip()]
        return tuple(_coerce_scalar(kind, p, key) for p in parts)
    if origin in (typing.Union, types.UnionType):
        # int | str: an integer or the literal keyword
        try:
            return int(text.strip())
        except ValueError:
            return text.strip()
    return _coerce_scalar(hint, text, key)


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        values[key] = coerce(key, value)
    return values


def build_config(values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    merged = dict(values or {})
    merged.update(overrides or {})
    for key in merged:
        if key not in _FIELDS:
            raise ConfigError(f"unknown configuration key {key!r}")
    try:
        cfg = ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    for w in cfg.warnings():
        log.warning("%s", w)
    return cfg


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file (``None`` means all defaults) and apply overrides.

    Raises:
        ConfigError: missing file, malformed line, unknown key or bad value.
    """
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        values = parse_text(p.read_text(), str(p))
    return build_config(values, overrides)


def parse_overrides(items) -> dict:
    """``["key=value", ...]`` from the command line."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = (x.strip() for x in item.split("=", 1))
        out[key] = coerce(key, value)
    return out
