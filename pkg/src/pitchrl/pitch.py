"""Pitch geometry, frame types and the kinematic preprocessing of raw tracking.

Coordinates are metres with the origin at the centre spot. After
:func:`normalize_attack_direction` the team in possession always attacks
towards ``+x``, so the opponent goal sits at ``(length / 2, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .config import PitchConfig

HOME, AWAY = "home", "away"
TEAMS = (HOME, AWAY)
POSITION_SLACK = 5.0


def other_team(team: str) -> str:
    if team == HOME:
        return AWAY
    if team == AWAY:
        return HOME
    raise ValueError(f"unknown team {team!r}")


@dataclass(frozen=True)
class PlayerState:
    player_id: int
    team: str
    jersey: int
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    acceleration: tuple[float, float] = (0.0, 0.0)
    height: float = 180.0
    visible: bool = True
    is_goalkeeper: bool = False

    def validate(self, pitch: PitchConfig) -> None:
        if self.team not in TEAMS:
            raise ValueError(f"player {self.player_id}: unknown team {self.team!r}")
        x, y = self.position
        if abs(x) > pitch.half_length + POSITION_SLACK or abs(y) > pitch.half_width + POSITION_SLACK:
            raise ValueError(f"player {self.player_id}: position {self.position} outside the pitch")
        if not self.height > 0:
            raise ValueError(f"player {self.player_id}: height must be positive")


@dataclass(frozen=True)
class BallState:
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class FrameSnapshot:
    """One synchronized instant: 22 players, the ball and the possession context.

    ``attack_direction`` is +1 when the possession team attacks towards +x in
    the frame's coordinates and -1 otherwise.
    """

    frame_index: int
    timestamp: float
    players: tuple[PlayerState, ...]
    ball: BallState
    possession_team: str | None
    on_ball_player: int | None = None
    attack_direction: int = 1
    formations: dict[str, str] = field(default_factory=dict, compare=False, hash=False)

    def validate(self, pitch: PitchConfig | None = None) -> None:
        if len(self.players) != 22:
            raise ValueError(f"frame {self.frame_index}: expected 22 players, got {len(self.players)}")
        counts = {team: sum(p.team == team for p in self.players) for team in TEAMS}
        if counts[HOME] != 11 or counts[AWAY] != 11:
            raise ValueError(f"frame {self.frame_index}: expected 11 players per team, got {counts}")
        ids = [p.player_id for p in self.players]
        if len(set(ids)) != 22:
            raise ValueError(f"frame {self.frame_index}: duplicate player ids")
        if self.on_ball_player is not None and self.on_ball_player not in ids:
            raise ValueError(f"frame {self.frame_index}: on-ball player {self.on_ball_player} not present")
        if self.attack_direction not in (1, -1):
            raise ValueError(f"frame {self.frame_index}: attack_direction must be +1 or -1")
        if pitch is not None:
            for p in self.players:
                p.validate(pitch)

    def player(self, player_id: int) -> PlayerState:
        for p in self.players:
            if p.player_id == player_id:
                return p
        raise KeyError(f"player {player_id} not in frame {self.frame_index}")

    def team_players(self, team: str, visible_only: bool = False) -> list[PlayerState]:
        return [p for p in self.players if p.team == team and (p.visible or not visible_only)]

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([p.player_id for p in self.players], dtype=np.int64)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.players], dtype=float)

    @cached_property
    def velocities(self) -> np.ndarray:
        return np.array([p.velocity for p in self.players], dtype=float)


@dataclass
class Kinematics:
    position: np.ndarray  # (T, 2), gaps filled
    velocity: np.ndarray  # (T, 2)
    acceleration: np.ndarray  # (T, 2)
    visible: np.ndarray  # (T,) bool, False inside gaps longer than the limit


def _fill_gaps(values: np.ndarray, max_gap: int) -> tuple[np.ndarray, np.ndarray]:
    missing = np.isnan(values).any(axis=1)
    if missing.all():
        raise ValueError("position series is entirely missing")
    idx = np.arange(len(values))
    filled = values.copy()
    good = ~missing
    for axis in range(values.shape[1]):
        filled[:, axis] = np.interp(idx, idx[good], values[good, axis])
    visible = np.ones(len(values), dtype=bool)
    # flag runs of missing samples that are too long to trust
    run_start = None
    for i, m in enumerate(np.append(missing, False)):
        if m and run_start is None:
            run_start = i
        elif not m and run_start is not None:
            if i - run_start > max_gap:
                visible[run_start:i] = False
            run_start = None
    return filled, visible


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average; the window shrinks symmetrically at the ends."""
    if window <= 1:
        return values
    half = window // 2
    out = np.empty_like(values)
    n = len(values)
    for i in range(n):
        h = min(half, i, n - 1 - i)
        out[i] = values[i - h:i + h + 1].mean(axis=0)
    return out


def compute_kinematics(
    positions: Sequence[Sequence[float]] | np.ndarray,
    frame_rate: float,
    timestamps: Iterable[float] | None = None,
    max_gap: int = 10,
    smoothing_window: int = 5,
) -> Kinematics:
    """Velocity and acceleration of one object from its position series.

    Missing samples (NaN) are linearly interpolated before differencing;
    gaps longer than ``max_gap`` frames are still filled but reported as not
    visible. Derivatives use central differences in the interior and
    one-sided differences at the ends, followed by a centred moving average.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError("positions must have shape (T, 2)")
    if len(pos) < 3:
        raise ValueError(f"need at least 3 samples, got {len(pos)}")
    if frame_rate <= 0:
        raise ValueError("frame_rate must be positive")
    if timestamps is None:
        t = 1.0 / frame_rate  # uniform spacing keeps constant series exactly flat
    else:
        t = np.asarray(list(timestamps), dtype=float)
        if len(t) != len(pos):
            raise ValueError("timestamps and positions differ in length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    filled, visible = _fill_gaps(pos, max_gap)
    vel = _smooth(np.gradient(filled, t, axis=0, edge_order=1), smoothing_window)
    acc = _smooth(np.gradient(vel, t, axis=0, edge_order=1), smoothing_window)
    return Kinematics(position=filled, velocity=vel, acceleration=acc, visible=visible)


def mirror_frame(frame: FrameSnapshot) -> FrameSnapshot:
    """Reflect x, vx and ax of every object about x = 0 and flip the attack direction."""
    players = tuple(
        replace(
            p,
            position=(-p.position[0], p.position[1]),
            velocity=(-p.velocity[0], p.velocity[1]),
            acceleration=(-p.acceleration[0], p.acceleration[1]),
        )
        for p in frame.players
    )
    ball = BallState(
        position=(-frame.ball.position[0], frame.ball.position[1]),
        velocity=(-frame.ball.velocity[0], frame.ball.velocity[1]),
    )
    return replace(frame, players=players, ball=ball, attack_direction=-frame.attack_direction)


def mirror_frame_y(frame: FrameSnapshot) -> FrameSnapshot:
    """Reflect every object about y = 0 (used for lateral symmetry checks)."""
    players = tuple(
        replace(
            p,
            position=(p.position[0], -p.position[1]),
            velocity=(p.velocity[0], -p.velocity[1]),
            acceleration=(p.acceleration[0], -p.acceleration[1]),
        )
        for p in frame.players
    )
    ball = BallState(
        position=(frame.ball.position[0], -frame.ball.position[1]),
        velocity=(frame.ball.velocity[0], -frame.ball.velocity[1]),
    )
    return replace(frame, players=players, ball=ball)


def normalize_attack_direction(frame: FrameSnapshot) -> FrameSnapshot:
    """Return the frame with the possession team attacking towards +x."""
    if frame.possession_team not in TEAMS:
        raise ValueError(f"frame {frame.frame_index}: possession team unknown")
    if frame.attack_direction == 1:
        return frame
    return mirror_frame(frame)


def offside_line(frame: FrameSnapshot, attacking_team: str | None = None) -> float:
    """x-coordinate of the offside line faced by ``attacking_team`` (attacking +x).

    The halfway line when every attacker is in their own half; otherwise the
    deeper of the second-to-last defender and the ball.
    """
    team = attacking_team or frame.possession_team
    defenders = frame.team_players(other_team(team), visible_only=True)
    if len(defenders) < 2:
        raise ValueError(f"frame {frame.frame_index}: need at least 2 tracked defenders")
    attackers = frame.team_players(team, visible_only=True)
    if all(p.position[0] <= 0.0 for p in attackers):
        return 0.0
    xs = sorted((p.position[0] for p in defenders), reverse=True)
    return float(max(xs[1], frame.ball.position[0]))


def is_offside(frame: FrameSnapshot, player: PlayerState, line: float | None = None) -> bool:
    """Offside position of an attacker in a normalized frame."""
    if player.team != frame.possession_team:
        return False
    if line is None:
        line = offside_line(frame, player.team)
    x = player.position[0]
    return x > 0.0 and x > line
