"""Run-time parameters for the whole system, in one validated place.

Every knob the simulation, learning core, partner scripts, and sensor
synthesis consume lives on :class:`EihaConfig`.  Experimental conditions
differ only in ``mem_length`` (4.0 = full short-term memory, 1.0 =
truncated, 0 = disabled).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised when a configuration document or override is invalid."""


@dataclass(frozen=True)
class EihaConfig:
    # Core loop
    resolution: int = 10            # sensor ticks per second
    experience_length: float = 2.0  # seconds per experience window
    mem_length: float = 4.0         # short-term memory span, seconds; 0 disables it
    min_time: float = 0.5           # shortest face loss counted as a human hide, seconds
    max_time: float = 2.5           # longest face loss counted as a human hide, seconds
    bins: int = 8                   # discretization bins per continuous channel
    # Learning
    softmax_temperature: float = 0.25
    exploration_epsilon: float = 0.1
    merge_threshold: float = 8.0    # information-distance units, bits
    reward_update_rate: float = 0.2
    reward_horizon: float = 1.0     # seconds of future reward folded into an experience
    # Trial control
    max_trial_seconds: float = 600.0
    rng_seed: int = 0
    # Sensor synthesis
    p_occlude: float = 0.8          # per-tick face-loss probability while the robot hides
    sigma_img: float = 0.05         # uniform image noise amplitude
    # Partner script constants
    partner_latency: float = 1.5        # seconds between seeing a robot turn and responding
    partner_hide_min: float = 0.8       # seconds, lower hide-duration bound
    partner_hide_max: float = 2.0       # seconds, upper hide-duration bound
    partner_beat_interval: float = 0.4  # seconds between drum beats in a partner turn
    partner_beats_min: int = 2
    partner_beats_max: int = 5
    partner_seed_period: float = 15.0   # seconds of idle play before the partner initiates
    partner_aversion: float = 1.0       # seconds of gaze aversion after an off-game action
    partner_boredom: float = 10.0       # seconds without game rounds before gaze drops
    partner_interest: float = 3.0       # seconds of gaze a characteristic action attracts
    partner_phase_patience: float = 120.0  # seconds a dual teacher pushes one game before switching

    @property
    def window_ticks(self) -> int:
        return int(round(self.experience_length * self.resolution))

    @property
    def mem_ticks(self) -> int:
        return int(round(self.mem_length * self.resolution))

    @property
    def horizon_ticks(self) -> int:
        return int(round(self.reward_horizon * self.resolution))

    @property
    def max_ticks(self) -> int:
        return int(round(self.max_trial_seconds * self.resolution))

    def replace(self, **overrides: Any) -> "EihaConfig":
        return load_config({**self.to_dict(), **overrides})

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(EihaConfig)}

_INT_FIELDS = {name for name, f in _FIELDS.items() if f.type == "int"}


def _coerce(name: str, value: Any) -> Any:
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got a boolean")
    if name in _INT_FIELDS:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: expected an integer, got {value!r}") from None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {value!r}") from None


def _validate(cfg: EihaConfig) -> None:
    def require(ok: bool, field: str, message: str) -> None:
        if not ok:
            raise ConfigError(f"{field}: {message}")

    require(cfg.resolution >= 1, "resolution", "must be a positive integer")
    require(cfg.experience_length > 0, "experience_length", "must be positive")
    require(cfg.window_ticks >= 2, "experience_length",
            "experience_length * resolution must be at least 2 samples")
    require(cfg.mem_length >= 0, "mem_length", "must be non-negative")
    require(cfg.min_time > 0, "min_time", "must be positive")
    require(cfg.min_time < cfg.max_time, "min_time/max_time",
            f"min_time ({cfg.min_time}) must be below max_time ({cfg.max_time})")
    require(cfg.bins >= 2, "bins", "must be at least 2")
    require(cfg.softmax_temperature > 0, "softmax_temperature", "must be positive")
    require(0.0 <= cfg.exploration_epsilon <= 1.0, "exploration_epsilon",
            "must lie in [0, 1]")
    require(cfg.merge_threshold >= 0, "merge_threshold", "must be non-negative")
    require(0.0 < cfg.reward_update_rate <= 1.0, "reward_update_rate",
            "must lie in (0, 1]")
    require(cfg.reward_horizon >= 0, "reward_horizon", "must be non-negative")
    require(cfg.max_trial_seconds >= 0, "max_trial_seconds", "must be non-negative")
    require(cfg.rng_seed >= 0, "rng_seed", "must be non-negative")
    require(0.0 <= cfg.p_occlude <= 1.0, "p_occlude", "must lie in [0, 1]")
    require(cfg.sigma_img >= 0, "sigma_img", "must be non-negative")
    require(cfg.partner_latency >= 0, "partner_latency", "must be non-negative")
    require(cfg.min_time < cfg.partner_hide_min, "partner_hide_min",
            f"must exceed min_time ({cfg.min_time}) so partner hides are scoreable")
    require(cfg.partner_hide_min <= cfg.partner_hide_max, "partner_hide_max",
            "must be at least partner_hide_min")
    require(cfg.partner_hide_max < cfg.max_time, "partner_hide_max",
            f"must stay below max_time ({cfg.max_time}) so partner hides are scoreable")
    require(1 <= cfg.partner_beats_min <= cfg.partner_beats_max, "partner_beats_min",
            "must satisfy 1 <= partner_beats_min <= partner_beats_max")
    require(cfg.partner_beat_interval > 0, "partner_beat_interval", "must be positive")
    require(cfg.partner_seed_period > 0, "partner_seed_period", "must be positive")
    require(cfg.partner_aversion >= 0, "partner_aversion", "must be non-negative")
    require(cfg.partner_boredom > 0, "partner_boredom", "must be positive")
    require(cfg.partner_interest >= 0, "partner_interest", "must be non-negative")
    require(cfg.partner_phase_patience > 0, "partner_phase_patience", "must be positive")


def load_config(source: str | Path | Mapping[str, Any] | None = None,
                overrides: Mapping[str, Any] | None = None) -> EihaConfig:
    """Build a validated config from a flat JSON document plus overrides.

    ``source`` may be a mapping, a path to a JSON file, or None (defaults).
    Unknown keys and invariant violations raise :class:`ConfigError` naming
    the offending field; values are never silently clamped.
    """
    if source is None:
        doc: dict[str, Any] = {}
    elif isinstance(source, Mapping):
        doc = dict(source)
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {source}: {exc}") from exc
        try:
            parsed = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {source} is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ConfigError(f"config file {source} must hold a flat JSON object")
        doc = parsed
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})

    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = {name: _coerce(name, value) for name, value in doc.items()}
    cfg = EihaConfig(**values)
    _validate(cfg)
    return cfg


def serialize_config(cfg: EihaConfig) -> str:
    """Render a config as the same flat JSON document load_config accepts."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
