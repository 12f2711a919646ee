"""Run configuration: JSON file + command-line overrides.

Precedence, lowest to highest: built-in defaults, the ``--config`` JSON
document, explicit command-line flags.
"""

import json
import math
from dataclasses import dataclass, fields, replace

from .baseband import BIT_CODINGS
from .metrics import SweepGrid
from .neuro.weights import WIDTH


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    snr_list: tuple = (-5.0, 0.0, 5.0, 10.0, 15.0)
    n_list: tuple = (1, 2, 4)
    m_list: tuple = (2, 4, 8)
    c_list: tuple = (24, 48, 96)
    depth: int = 6
    image_height: int = 256
    image_width: int = 128
    eps_singular: float = 1e-12
    bit_coding: str = "natural"
    seed: int = 0
    bits_target: int = 10 ** 7
    frame_columns: int = 32
    workers: int = 1
    long_run: bool = False
    distribution: str = "normal"
    weights: str = None
    pyramid: str = None
    out: str = None
    synth_what: str = "pyramid"

    @property
    def grid(self):
        return SweepGrid(self.snr_list, self.n_list, self.m_list, self.c_list)

    def to_dict(self):
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}


_LISTS = {"snr_list": float, "n_list": int, "m_list": int, "c_list": int}


def _coerce(name, value):
    try:
        if name in _LISTS:
            if not isinstance(value, (list, tuple)):
                raise TypeError("expected a list")
            kind = _LISTS[name]
            out = []
            for v in value:
                if isinstance(v, bool) or (kind is int and float(v) != int(v)):
                    raise TypeError(f"bad element {v!r}")
                out.append(kind(v))
            return tuple(out)
        default = getattr(RunConfig, name)
        if value is None:
            return None
        if name in ("weights", "pyramid", "out", "bit_coding", "distribution", "synth_what"):
            return str(value)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError("expected true/false")
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError("expected an integer")
            return int(value)
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {name!r}: {exc}") from exc


def from_mapping(data, base=None):
    """Apply a mapping of overrides on top of ``base`` (default: defaults)."""
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    updates = {k: _coerce(k, v) for k, v in data.items()}
    return replace(base or RunConfig(), **updates)


def load_json(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def validate(cfg, command):
    """Check every grid value against module preconditions before any work."""
    problems = []
    if any(not math.isfinite(s) for s in cfg.snr_list):
        problems.append("snr_list values must be finite")
    if any(n < 1 for n in cfg.n_list):
        problems.append("n_list values must be >= 1")
    if cfg.workers < 1:
        problems.append("workers must be >= 1")
    if command == "ber":
        if cfg.bits_target < 10 ** 4:
            problems.append("bits_target must be >= 10000")
        if cfg.frame_columns < 1:
            problems.append("frame_columns must be >= 1")
    if command in ("transmit", "synth"):
        h, w = cfg.image_height, cfg.image_width
        if h < 64 or w < 64 or h % 64 or w % 64:
            problems.append(f"image size {h}x{w} must be a positive multiple of 64")
        if cfg.depth < 1:
            problems.append("depth must be >= 1")
        if any(m < 1 for m in cfg.m_list):
            problems.append("m_list values must be >= 1")
        if any(c < 1 for c in cfg.c_list):
            problems.append("c_list values must be >= 1")
        for n in cfg.n_list:
            if n >= 1 and WIDTH % n:
                problems.append(f"n={n} does not divide {WIDTH}")
            for c in cfg.c_list:
                if n >= 1 and c >= 1 and c % n:
                    problems.append(f"c={c} is not divisible by n={n}")
        if cfg.bit_coding not in BIT_CODINGS:
            problems.append(f"bit_coding must be one of {BIT_CODINGS}")
        if cfg.distribution not in ("normal", "uniform"):
            problems.append("distribution must be 'normal' or 'uniform'")
        if cfg.eps_singular <= 0:
            problems.append("eps_singular must be positive")
    if command == "synth":
        if cfg.out is None:
            problems.append("synth needs an output directory (--out)")
        if cfg.synth_what not in ("pyramid", "weights", "all"):
            problems.append("synth_what must be pyramid, weights or all")
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg

