"""Expected-possession-value grid and per-step reward assignment.

Rewards are indexed by step: ``rewards[t]`` is the reward received after the
action at step ``t``. Intermediate steps are 0 except shot moments, which
receive the EPV of the ball position; the terminal step receives +1 for a
goal, -1 when the opponent scores in the following possession, and the EPV
of the final ball position otherwise.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import PitchConfig
from .edms import ImportanceSurface

GOAL, CONCEDED_NEXT, OTHER = "goal", "conceded_next", "other"
OUTCOMES = (GOAL, CONCEDED_NEXT, OTHER)


@dataclass(frozen=True)
class EpvGrid:
    """EPV values on an ``n_x`` (along the length) by ``n_y`` cell grid, attacking +x."""

    values: np.ndarray
    pitch_length: float = 105.0
    pitch_width: float = 68.0

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or min(v.shape) < 1:
            raise ValueError(f"EPV grid must be a 2-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("EPV values must be finite and within [0, 1]")
        if self.pitch_length <= 0 or self.pitch_width <= 0:
            raise ValueError("EPV pitch dimensions must be positive")
        object.__setattr__(self, "values", v)
        means = v.mean(axis=1)
        if np.any(np.diff(means) < -1e-12):
            warnings.warn("EPV column means are not monotone towards the attacked goal")

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_y(self) -> int:
        return self.values.shape[1]

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        dx = self.pitch_length / self.n_x
        dy = self.pitch_width / self.n_y
        xs = -self.pitch_length / 2 + dx * (np.arange(self.n_x) + 0.5)
        ys = -self.pitch_width / 2 + dy * (np.arange(self.n_y) + 0.5)
        return xs, ys


def default_epv_grid(pitch: PitchConfig | None = None, surface: ImportanceSurface | None = None,
                     n_x: int = 50, n_y: int = 32, top: float = 0.35) -> EpvGrid:
    """The shipped surface: the importance function rescaled to [0, ``top``]."""
    pitch = pitch or PitchConfig()
    surface = surface or ImportanceSurface()
    dx, dy = pitch.length / n_x, pitch.width / n_y
    xs = -pitch.half_length + dx * (np.arange(n_x) + 0.5)
    ys = -pitch.half_width + dy * (np.arange(n_y) + 0.5)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    imp = surface(gx, gy)
    values = (imp - imp.min()) / (imp.max() - imp.min()) * top
    return EpvGrid(values, pitch.length, pitch.width)


def _axis_weights(coord: float, centers: np.ndarray) -> tuple[int, int, float]:
    if len(centers) == 1:
        return 0, 0, 0.0
    c = float(np.clip(coord, centers[0], centers[-1]))
    step = centers[1] - centers[0]
    i = int(min(np.floor((c - centers[0]) / step), len(centers) - 2))
    frac = (c - centers[i]) / step
    return i, i + 1, float(np.clip(frac, 0.0, 1.0))


def epv_lookup(grid: EpvGrid, ball_position: Sequence[float]) -> float:
    """Bilinear interpolation between cell centres; positions are clipped to the grid."""
    xs, ys = grid.centers()
    i0, i1, fx = _axis_weights(ball_position[0], xs)
    j0, j1, fy = _axis_weights(ball_position[1], ys)
    v = grid.values
    top = (1 - fx) * v[i0, j0] + fx * v[i1, j0]
    bottom = (1 - fx) * v[i0, j1] + fx * v[i1, j1]
    return float((1 - fy) * top + fy * bottom)


def save_epv_grid(grid: EpvGrid, path: str | Path) -> None:
    """Native CSV: ``n_x,n_y,pitch_length,pitch_width`` header, then n_x rows of n_y values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_x", "n_y", "pitch_length", "pitch_width"])
        writer.writerow([grid.n_x, grid.n_y, repr(grid.pitch_length), repr(grid.pitch_width)])
        for row in grid.values:
            writer.writerow([repr(float(v)) for v in row])


def load_epv_grid(path: str | Path) -> EpvGrid:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 3 or [c.strip() for c in rows[0]] != ["n_x", "n_y", "pitch_length", "pitch_width"]:
        raise ValueError(f"{path}: missing 'n_x,n_y,pitch_length,pitch_width' header")
    try:
        n_x, n_y = int(rows[1][0]), int(rows[1][1])
        length, width = float(rows[1][2]), float(rows[1][3])
        values = np.array([[float(c) for c in r] for r in rows[2:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed EPV grid ({exc})") from exc
    if values.shape != (n_x, n_y):
        raise ValueError(f"{path}: expected {n_x}x{n_y} values, got {values.shape}")
    return EpvGrid(values, length, width)


def load_fot_epv_grid(path: str | Path, pitch: PitchConfig | None = None) -> EpvGrid:
    """Friends-of-Tracking layout: headerless rows along the width, columns along the length."""
    pitch = pitch or PitchConfig()
    values = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    return EpvGrid(values.T.copy(), pitch.length, pitch.width)


def reward_stream(n_steps: int, outcome: str | None, ball_positions: np.ndarray,
                  shot_steps: Sequence[int], grid: EpvGrid) -> np.ndarray:
    if outcome not in OUTCOMES:
        raise ValueError(f"unresolved sequence outcome {outcome!r}")
    if n_steps < 1:
        raise ValueError("sequence has no steps")
    ball_positions = np.asarray(ball_positions, dtype=float)
    if len(ball_positions) != n_steps:
        raise ValueError("ball positions do not match the number of steps")
    rewards = np.zeros(n_steps)
    for k in shot_steps:
        if not 0 <= k < n_steps:
            raise ValueError(f"shot step {k} outside the sequence")
        rewards[k] = epv_lookup(grid, ball_positions[k])
    if outcome == GOAL:
        rewards[-1] = 1.0
    elif outcome == CONCEDED_NEXT:
        rewards[-1] = -1.0
    else:
        rewards[-1] = epv_lookup(grid, ball_positions[-1])
    return rewards


def assign_rewards(sequence, grid: EpvGrid, next_sequence=None) -> np.ndarray:
    """Reward stream of a possession sequence.

    ``next_sequence`` upgrades an ``other`` outcome to a concession when the
    immediately following possession belongs to the opponent and ends in a
    goal.
    """
    outcome = sequence.outcome
    if (outcome == OTHER and next_sequence is not None
            and next_sequence.team != sequence.team and next_sequence.outcome == GOAL):
        outcome = CONCEDED_NEXT
    balls = np.array([f.ball.position for f in sequence.frames], dtype=float)
    return reward_stream(len(sequence.frames), outcome, balls, sequence.shot_steps, grid)


def load_grid_for(config) -> EpvGrid:
    """EPV grid selected by a :class:`~pitchrl.config.Config`."""
    rc = config.reward
    if rc.epv_path is None:
        return default_epv_grid(config.pitch, ImportanceSurface.from_config(config.edms))
    if rc.epv_format == "fot":
        return load_fot_epv_grid(rc.epv_path, config.pitch)
    return load_epv_grid(rc.epv_path)
