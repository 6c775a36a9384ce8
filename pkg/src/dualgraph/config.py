"""Runtime configuration: tunables, file loading, CLI override merging."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

from .errors import ConfigError

ENV_VAR = "DUALGRAPH_CONFIG"


@dataclass
class Config:
    """All tunables in one flat namespace.

    Every field has a working default; files and CLI flags override them
    (flag > file > default).
    """

    # belief
    p0: float = 0.9                 # prior probability of a clean primitive
    drop_threshold: float = 0.2     # nodes below this are pruned
    link_threshold: float = 0.1     # links below this conditional are cut
    backward_depth: int = 2         # group-to-member hops a wave may travel
    s_fail: float = 9.0             # strain charged for a failed boolean relation
    competition_ratio: float = 0.5  # keep a competing claim within this factor of the best
    eps: float = 1e-6               # convergence tolerance (strain / probability)
    max_iters: int = 100            # optimizer / fixed-point iteration cap
    optional_weight: float = 0.5    # denominator weight of an optional part slot

    # recognizer
    screen_min: float = 0.05        # minimum screening score to keep a hypothesis
    gate_radius: float = 3.0        # match gate, in units of the part primary length
    max_waves: int = 10             # hypothesis wave cap
    relax: bool = True              # run frame relaxation each wave

    # learner
    z_min: float = 3.0              # histogram significance threshold
    f_min: float = 0.6              # scene fraction required to accept a candidate
    n_min: int = 5                  # minimum cluster size for a specialization split
    sep_min: float = 2.0            # required separation, in pooled stds
    sigma_floor: float = 0.01       # elasticity floor, relative to the mean
    max_rounds: int = 5             # learning round cap
    bins: int = 20                  # histogram bin count

    def copy(self, **overrides) -> "Config":
        return dataclasses.replace(self, **overrides)


_FIELDS = {f.name: f for f in dataclasses.fields(Config)}

# (low, high, low_open, high_open) bounds; None means unbounded on that side
_BOUNDS = {
    "p0": (0.0, 1.0, True, False),
    "drop_threshold": (0.0, 1.0, False, False),
    "link_threshold": (0.0, 1.0, False, False),
    "backward_depth": (0, None, False, False),
    "s_fail": (0.0, None, True, False),
    "competition_ratio": (0.0, 1.0, True, False),
    "eps": (0.0, None, True, False),
    "max_iters": (1, None, False, False),
    "optional_weight": (0.0, 1.0, True, False),
    "screen_min": (0.0, 1.0, False, False),
    "gate_radius": (0.0, None, True, False),
    "max_waves": (1, None, False, False),
    "z_min": (0.0, None, True, False),
    "f_min": (0.0, 1.0, False, False),
    "n_min": (2, None, False, False),
    "sep_min": (0.0, None, True, False),
    "sigma_floor": (0.0, None, True, False),
    "max_rounds": (1, None, False, False),
    "bins": (2, None, False, False),
}


def _coerce(name: str, value):
    field = _FIELDS[name]
    if field.type in ("bool", bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    if field.type in ("int", int):
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        out = int(float(value))
        if float(out) != float(value):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return out
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    return float(value)


def _check_bounds(name: str, value):
    bounds = _BOUNDS.get(name)
    if bounds is None or isinstance(value, bool):
        return
    low, high, low_open, high_open = bounds
    if low is not None and (value < low or (low_open and value == low)):
        raise ConfigError(f"{name}: {value} out of range")
    if high is not None and (value > high or (high_open and value == high)):
        raise ConfigError(f"{name}: {value} out of range")


def make_config(base: Config | None = None, **overrides) -> Config:
    """Build a Config from a base plus overrides, validating keys and bounds."""
    cfg = base or Config()
    values = dataclasses.asdict(cfg)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown configuration key: {key}")
        values[key] = _coerce(key, value)
    for key, value in values.items():
        _check_bounds(key, value)
    return Config(**values)


def load_config_file(path: str) -> Config:
    """Read a flat JSON object of config keys. Unknown keys are rejected."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return make_config(**raw)


def resolve_config(file_flag: str | None = None, **flag_overrides) -> Config:
    """Apply the precedence chain: CLI flag > config file > built-in default.

    The config file comes from `file_flag` if given, else from the
    DUALGRAPH_CONFIG environment variable if set.
    """
    path = file_flag or os.environ.get(ENV_VAR)
    cfg = load_config_file(path) if path else Config()
    return make_config(cfg, **flag_overrides)
