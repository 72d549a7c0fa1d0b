"""Configuration objects and the JSON config loader.

Every tunable constant of the pipeline lives here with its default. A config
file is a single JSON document with optional sections ``pitch``, ``edms``,
``ingest``, ``reward`` and ``train``; unknown keys and invalid values are
rejected with a dotted path to the offending entry.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for invalid configuration values; the message starts with the key path."""


@dataclass(frozen=True)
class PitchConfig:
    length: float = 105.0
    width: float = 68.0
    goal_width: float = 7.32
    frame_rate: float = 25.0

    def validate(self, path: str = "pitch") -> None:
        _require(self.length > 0, f"{path}.length", "must be > 0")
        _require(self.width > 0, f"{path}.width", "must be > 0")
        _require(0 < self.goal_width < self.width, f"{path}.goal_width", "must be in (0, width)")
        _require(self.frame_rate > 0, f"{path}.frame_rate", "must be > 0")

    @property
    def half_length(self) -> float:
        return self.length / 2.0

    @property
    def half_width(self) -> float:
        return self.width / 2.0

    @property
    def area(self) -> float:
        return self.length * self.width


DEFAULT_FORMATIONS = ("4-4-2", "4-3-3", "4-2-3-1", "3-5-2", "3-4-3", "5-3-2", "other")


@dataclass(frozen=True)
class EdmsConfig:
    # importance surface
    sigmoid_midpoint: float = 17.5
    sigmoid_steepness: float = 0.1
    gaussian_sigma: float = 20.0
    # velocity-aware Voronoi
    projection_horizon: float = 0.5
    grid_resolution: float = 1.0
    # time-to-reach motion model
    v_max: float = 8.0
    reaction_time: float = 0.0
    passline_step: float = 1.0
    # shot score
    shot_range: float = 30.0
    shot_block_half_width: float = 1.0
    shot_n_angles: int = 101
    # pass score weights (dist_ball, space_score, time_to_reach_player, time_to_reach_passline)
    pass_weights: tuple[float, float, float, float] = (0.5, 0.3, 0.2, 0.2)
    formations: tuple[str, ...] = DEFAULT_FORMATIONS

    def validate(self, path: str = "edms") -> None:
        _require(self.sigmoid_steepness > 0, f"{path}.sigmoid_steepness", "must be > 0")
        _require(self.gaussian_sigma > 0, f"{path}.gaussian_sigma", "must be > 0")
        _require(self.projection_horizon >= 0, f"{path}.projection_horizon", "must be >= 0")
        _require(self.grid_resolution > 0, f"{path}.grid_resolution", "must be > 0")
        _require(self.v_max > 0, f"{path}.v_max", "must be > 0")
        _require(self.reaction_time >= 0, f"{path}.reaction_time", "must be >= 0")
        _require(self.passline_step > 0, f"{path}.passline_step", "must be > 0")
        _require(self.shot_range > 0, f"{path}.shot_range", "must be > 0")
        _require(self.shot_block_half_width > 0, f"{path}.shot_block_half_width", "must be > 0")
        _require(self.shot_n_angles >= 2, f"{path}.shot_n_angles", "must be >= 2")
        _require(len(self.pass_weights) == 4, f"{path}.pass_weights", "must have 4 entries")
        _require(len(self.formations) >= 1, f"{path}.formations", "must not be empty")
        _require(len(set(self.formations)) == len(self.formations), f"{path}.formations",
                 "must not contain duplicates")


@dataclass(frozen=True)
class IngestConfig:
    v_stay: float = 0.5
    label_window: float = 1.0
    attach_tolerance: float = 1.0
    max_gap_frames: int = 10
    smoothing_window: int = 5
    min_frames: int = 30
    max_frames: int = 600

    def validate(self, path: str = "ingest") -> None:
        _require(self.v_stay >= 0, f"{path}.v_stay", "must be >= 0")
        _require(self.label_window > 0, f"{path}.label_window", "must be > 0")
        _require(self.attach_tolerance > 0, f"{path}.attach_tolerance", "must be > 0")
        _require(self.max_gap_frames >= 0, f"{path}.max_gap_frames", "must be >= 0")
        _require(self.smoothing_window >= 1, f"{path}.smoothing_window", "must be >= 1")
        _require(1 <= self.min_frames <= self.max_frames, f"{path}.min_frames",
                 "must satisfy 1 <= min_frames <= max_frames")


@dataclass(frozen=True)
class RewardConfig:
    epv_path: str | None = None
    epv_format: str = "native"  # "native" or "fot"

    def validate(self, path: str = "reward") -> None:
        _require(self.epv_format in ("native", "fot"), f"{path}.epv_format",
                 "must be 'native' or 'fot'")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    l1_weight: float = 0.001
    action_weight: float = 0.05
    gamma: float = 1.0
    epochs: int = 20
    seed: int = 0
    mask_value: float = -9999.0
    hidden_size: int = 64
    mask: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self, path: str = "train") -> None:
        _require(self.learning_rate > 0, f"{path}.learning_rate", "must be > 0")
        _require(self.l1_weight >= 0, f"{path}.l1_weight", "must be >= 0")
        _require(self.action_weight >= 0, f"{path}.action_weight", "must be >= 0")
        _require(0.0 <= self.gamma <= 1.0, f"{path}.gamma", "must be in [0, 1]")
        _require(self.epochs >= 0, f"{path}.epochs", "must be >= 0")
        _require(self.hidden_size >= 1, f"{path}.hidden_size", "must be >= 1")
        _require(math.isfinite(self.mask_value), f"{path}.mask_value", "must be finite")
        _require(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, f"{path}.beta1",
                 "betas must be in [0, 1)")


@dataclass(frozen=True)
class Config:
    pitch: PitchConfig = field(default_factory=PitchConfig)
    edms: EdmsConfig = field(default_factory=EdmsConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        self.pitch.validate()
        self.edms.validate()
        self.ingest.validate()
        self.reward.validate()
        self.train.validate()

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_SECTIONS = {
    "pitch": PitchConfig,
    "edms": EdmsConfig,
    "ingest": IngestConfig,
    "reward": RewardConfig,
    "train": TrainConfig,
}


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _coerce(value: Any, default: Any, path: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        if default and isinstance(default[0], float):
            return tuple(_coerce(v, 0.0, f"{path}[{i}]") for i, v in enumerate(value))
        return tuple(str(v) for v in value)
    if value is not None and not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string")
    return value


def config_from_dict(data: dict[str, Any]) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("<root>: expected a JSON object")
    sections: dict[str, Any] = {}
    for name, payload in data.items():
        if name not in _SECTIONS:
            raise ConfigError(f"{name}: unknown section")
        cls = _SECTIONS[name]
        if not isinstance(payload, dict):
            raise ConfigError(f"{name}: expected an object")
        defaults = cls()
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in payload.items():
            if key not in known:
                raise ConfigError(f"{name}.{key}: unknown key")
            kwargs[key] = _coerce(value, getattr(defaults, key), f"{name}.{key}")
        sections[name] = cls(**kwargs)
    config = Config(**sections)
    config.validate()
    return config


def load_config(path: str | Path | None) -> Config:
    """Load and validate a JSON config; ``None`` gives the defaults."""
    if path is None:
        return Config()
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"<root>: invalid JSON ({exc})") from exc
    return config_from_dict(data)
