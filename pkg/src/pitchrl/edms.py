"""Expandable decision-making state features.

The state of a frame is split into an absolute block (offside-line distances,
formations), an off-ball block with one row per attacking off-ball player,
and two on-ball blocks (intra-possession for a resolved ball carrier,
inter-possession while the ball is changing hands). Only the block matching
the frame's context is filled; the other is zeros with its indicator at 0.

All functions expect frames normalized so the possession team attacks +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .config import EdmsConfig, PitchConfig
from .pitch import (
    AWAY,
    HOME,
    FrameSnapshot,
    PlayerState,
    is_offside,
    mirror_frame,
    offside_line,
    other_team,
)

INTRA, INTER = "intra", "inter"

# 0 deg points at the opponent goal (+x), counter-clockwise in 45 deg steps
DIRECTIONS = np.array(
    [[math.cos(math.radians(a)), math.sin(math.radians(a))] for a in range(0, 360, 45)]
)
DIRECTIONS[np.abs(DIRECTIONS) < 1e-15] = 0.0
DIRECTION_NAMES = tuple(f"{a}" for a in range(0, 360, 45))

OFF_BALL_COLUMNS = (
    ("dist_ball", "time_to_reach_player", "time_to_reach_passline", "space_score")
    + tuple(f"delta_space_{d}" for d in DIRECTION_NAMES)
    + ("pass_score",)
)
INTRA_COLUMNS = (
    ("intra_active", "intra_time_to_ball_opponent", "intra_dist_goal", "intra_angle_goal")
    + tuple(f"dribble_{d}" for d in DIRECTION_NAMES)
    + ("shot_score", "shot_valid", "long_ball_left", "long_ball_center", "long_ball_right")
)
INTER_COLUMNS = (
    "inter_active",
    "inter_time_to_ball_attack",
    "inter_time_to_ball_defend",
    "inter_dist_own_goal",
    "inter_angle_own_goal",
    "inter_dist_opp_goal",
    "inter_angle_opp_goal",
    "ball_speed",
    "transition",
)
N_OFF_BALL_ROWS = 10

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class ImportanceSurface:
    """Pitch importance: sigmoid towards the opponent goal times a lateral Gaussian."""

    sigmoid_midpoint: float = 17.5
    sigmoid_steepness: float = 0.1
    gaussian_sigma: float = 20.0

    def __post_init__(self) -> None:
        if not self.sigmoid_steepness > 0:
            raise ValueError("sigmoid_steepness must be > 0")
        if not self.gaussian_sigma > 0:
            raise ValueError("gaussian_sigma must be > 0")

    @classmethod
    def from_config(cls, cfg: EdmsConfig) -> "ImportanceSurface":
        return cls(cfg.sigmoid_midpoint, cfg.sigmoid_steepness, cfg.gaussian_sigma)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        sig = 1.0 / (1.0 + np.exp(-self.sigmoid_steepness * (x - self.sigmoid_midpoint)))
        return sig * np.exp(-(y ** 2) / (2.0 * self.gaussian_sigma ** 2))


def importance(point: Sequence[float], surface: ImportanceSurface) -> float:
    return float(surface(point[0], point[1]))


@dataclass(frozen=True)
class PitchGrid:
    """Cell-centred grid over the pitch; ``n_x`` columns along the length."""

    pitch: PitchConfig
    resolution: float

    @property
    def n_x(self) -> int:
        return max(1, int(round(self.pitch.length / self.resolution)))

    @property
    def n_y(self) -> int:
        return max(1, int(round(self.pitch.width / self.resolution)))

    @property
    def cell_area(self) -> float:
        return (self.pitch.length / self.n_x) * (self.pitch.width / self.n_y)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        dx = self.pitch.length / self.n_x
        dy = self.pitch.width / self.n_y
        xs = -self.pitch.half_length + dx * (np.arange(self.n_x) + 0.5)
        ys = -self.pitch.half_width + dy * (np.arange(self.n_y) + 0.5)
        return xs, ys

    def flat_centers(self) -> np.ndarray:
        xs, ys = self.centers()
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


_GRID_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _grid_cells(grid: PitchGrid, surface: ImportanceSurface) -> tuple[np.ndarray, np.ndarray]:
    key = (grid.pitch, grid.resolution, surface)
    if key not in _GRID_CACHE:
        cells = grid.flat_centers()
        weights = surface(cells[:, 0], cells[:, 1]) * grid.cell_area
        _GRID_CACHE[key] = (cells, weights)
    return _GRID_CACHE[key]


@dataclass
class DominantRegion:
    grid: PitchGrid
    player_ids: np.ndarray  # sorted ids of the visible players
    owner: np.ndarray  # (n_x, n_y) owning player id per cell


def _projected(frame: FrameSnapshot, horizon: float) -> tuple[np.ndarray, np.ndarray]:
    visible = [p for p in frame.players if p.visible]
    if not visible:
        raise ValueError(f"frame {frame.frame_index}: no visible players")
    visible.sort(key=lambda p: p.player_id)
    ids = np.array([p.player_id for p in visible], dtype=np.int64)
    pos = np.array([p.position for p in visible], dtype=float)
    vel = np.array([p.velocity for p in visible], dtype=float)
    return ids, pos + horizon * vel


def _sq_dist(points: np.ndarray, cells: np.ndarray) -> np.ndarray:
    dx = cells[None, :, 0] - points[:, None, 0]
    dy = cells[None, :, 1] - points[:, None, 1]
    return dx * dx + dy * dy


def dominant_region(
    frame: FrameSnapshot,
    grid_resolution: float = 1.0,
    pitch: PitchConfig | None = None,
    horizon: float = 0.5,
) -> DominantRegion:
    """Assign each grid cell to the player whose projected position is nearest.

    Positions are projected ``horizon`` seconds ahead along the current
    velocity; ties go to the lower player id.
    """
    grid = PitchGrid(pitch or PitchConfig(), grid_resolution)
    ids, proj = _projected(frame, horizon)
    cells = grid.flat_centers()
    owner_idx = np.argmin(_sq_dist(proj, cells), axis=0)
    return DominantRegion(grid, ids, ids[owner_idx].reshape(grid.n_x, grid.n_y))


def _offside_line_arrays(att_x: np.ndarray, def_x: np.ndarray, ball_x: float) -> float:
    if np.all(att_x <= 0.0):
        return 0.0
    second = np.sort(def_x)[-2]
    return float(max(second, ball_x))


class SpaceField:
    """Per-frame Voronoi ownership with incremental re-scoring of one moved player."""

    def __init__(self, frame: FrameSnapshot, cfg: EdmsConfig, pitch: PitchConfig,
                 surface: ImportanceSurface):
        self.frame = frame
        self.cfg = cfg
        self.pitch = pitch
        self.grid = PitchGrid(pitch, cfg.grid_resolution)
        self.cells, self.weights = _grid_cells(self.grid, surface)
        self.ids, self.proj = _projected(frame, cfg.projection_horizon)
        d2 = _sq_dist(self.proj, self.cells)
        cols = np.arange(d2.shape[1])
        # argmin keeps the first minimum, i.e. the lower id on ties
        self.best = np.argmin(d2, axis=0)
        self.best_d = d2[self.best, cols]
        if len(self.ids) > 1:
            d2[self.best, cols] = np.inf
            self.second = np.argmin(d2, axis=0)
            self.second_d = d2[self.second, cols]
        else:
            self.second = np.full_like(self.best, -1)
            self.second_d = np.full(d2.shape[1], np.inf)
        self.cx = np.ascontiguousarray(self.cells[:, 0])
        self.cy = np.ascontiguousarray(self.cells[:, 1])
        self.owned_weight = np.bincount(self.best, weights=self.weights, minlength=len(self.ids))
        self.index = {int(pid): i for i, pid in enumerate(self.ids)}
        team = frame.possession_team
        visible = [p for p in frame.players if p.visible]
        self.att_x = {p.player_id: p.position[0] for p in visible if p.team == team}
        self.def_x = np.array([p.position[0] for p in visible if p.team != team])

    def _line(self, moved_id: int, moved_x: float, ball_x: float) -> float:
        att = np.array([moved_x if pid == moved_id else x for pid, x in self.att_x.items()])
        return _offside_line_arrays(att, self.def_x, ball_x)

    def _offside(self, player: PlayerState, x: float, ball_x: float) -> bool:
        if player.team != self.frame.possession_team or len(self.def_x) < 2:
            return False
        line = self._line(player.player_id, x, ball_x)
        return x > 0.0 and x > line

    def owned_importance(self, player_id: int) -> float:
        """Unnormalized importance-weighted area owned at the current positions."""
        i = self.index.get(player_id)
        return 0.0 if i is None else float(self.owned_weight[i])

    def score(self, player: PlayerState) -> float:
        if not player.visible:
            return 0.0
        if self._offside(player, player.position[0], self.frame.ball.position[0]):
            return 0.0
        return self.owned_importance(player.player_id) / self.pitch.area

    def score_moved(self, player: PlayerState, new_position: np.ndarray, carry_ball: bool) -> float:
        return float(self.scores_moved(player, np.asarray(new_position, dtype=float)[None, :],
                                       carry_ball)[0])

    def scores_moved(self, player: PlayerState, positions: np.ndarray, carry_ball: bool) -> np.ndarray:
        """Space score of ``player`` relocated to each row of ``positions``, others fixed."""
        positions = np.asarray(positions, dtype=float)
        out = np.zeros(len(positions))
        if not player.visible:
            return out
        i = self.index[player.player_id]
        mine = self.best == i
        other = np.where(mine, self.second, self.best)
        other_d = np.where(mine, self.second_d, self.best_d)
        other_id = np.where(other >= 0, self.ids[np.maximum(other, 0)], np.iinfo(np.int64).max)
        lower = player.player_id < other_id
        vel = self.cfg.projection_horizon * np.asarray(player.velocity, dtype=float)
        ball_x0 = self.frame.ball.position[0]
        for k, pos in enumerate(positions):
            ball_x = ball_x0 + (pos[0] - player.position[0] if carry_ball else 0.0)
            if self._offside(player, float(pos[0]), ball_x):
                continue
            q = pos + vel
            d = (self.cx - q[0]) ** 2 + (self.cy - q[1]) ** 2
            win = (d < other_d) | ((d == other_d) & lower)
            out[k] = self.weights @ win
        return out / self.pitch.area

    def deltas(self, player: PlayerState, carry_ball: bool = False) -> np.ndarray:
        base = self.score(player)
        moved = np.asarray(player.position, dtype=float) + DIRECTIONS
        moved[:, 0] = np.clip(moved[:, 0], -self.pitch.half_length, self.pitch.half_length)
        moved[:, 1] = np.clip(moved[:, 1], -self.pitch.half_width, self.pitch.half_width)
        return self.scores_moved(player, moved, carry_ball) - base


def _field(frame, cfg, pitch, surface) -> SpaceField:
    cfg = cfg or EdmsConfig()
    pitch = pitch or PitchConfig()
    surface = surface or ImportanceSurface.from_config(cfg)
    return SpaceField(frame, cfg, pitch, surface)


def space_score(frame: FrameSnapshot, player: PlayerState | int,
                surface: ImportanceSurface | None = None, cfg: EdmsConfig | None = None,
                pitch: PitchConfig | None = None) -> float:
    """Importance-weighted share of the pitch owned by ``player``; 0 when offside."""
    if isinstance(player, int):
        player = frame.player(player)
    return _field(frame, cfg, pitch, surface).score(player)


def delta_space_score_8dir(frame: FrameSnapshot, player: PlayerState | int,
                           surface: ImportanceSurface | None = None, cfg: EdmsConfig | None = None,
                           pitch: PitchConfig | None = None, carry_ball: bool = False) -> np.ndarray:
    """Change of space score after moving the player 1 m in each of 8 directions."""
    if isinstance(player, int):
        player = frame.player(player)
    return _field(frame, cfg, pitch, surface).deltas(player, carry_ball=carry_ball)


def dribble_score(frame: FrameSnapshot, on_ball_player: PlayerState | int | None = None,
                  surface: ImportanceSurface | None = None, cfg: EdmsConfig | None = None,
                  pitch: PitchConfig | None = None) -> np.ndarray:
    """8-direction space delta of the ball carrier; the ball moves with them."""
    pid = frame.on_ball_player if on_ball_player is None else on_ball_player
    if pid is None:
        raise ValueError(f"frame {frame.frame_index}: no on-ball player")
    return delta_space_score_8dir(frame, pid, surface, cfg, pitch, carry_ball=True)


def time_to_reach_point(player: PlayerState, target: Sequence[float], v_max: float = 8.0,
                        reaction_time: float = 0.0) -> float:
    """Arrival time: distance less the reaction-time run-on along the current velocity, over v_max."""
    return float(_ttr(np.asarray([player.position], float), np.asarray([player.velocity], float),
                      np.asarray([target], float), v_max, reaction_time)[0, 0])


def _ttr(pos: np.ndarray, vel: np.ndarray, targets: np.ndarray, v_max: float,
         reaction_time: float) -> np.ndarray:
    """Times (n_players, n_targets)."""
    diff = targets[None, :, :] - pos[:, None, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    if reaction_time == 0.0:
        return dist / v_max
    with np.errstate(invalid="ignore", divide="ignore"):
        along = np.where(dist > 0, (diff * vel[:, None, :]).sum(axis=2) / dist, 0.0)
    return np.maximum(0.0, (dist - along * reaction_time) / v_max)


def _team_arrays(players: list[PlayerState]) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([p.position for p in players], float).reshape(-1, 2),
            np.array([p.velocity for p in players], float).reshape(-1, 2))


def time_to_reach_player(frame: FrameSnapshot, player: PlayerState | int,
                         cfg: EdmsConfig | None = None) -> float:
    """Time for the quickest visible opponent to reach the player."""
    cfg = cfg or EdmsConfig()
    if isinstance(player, int):
        player = frame.player(player)
    opponents = frame.team_players(other_team(player.team), visible_only=True)
    if not opponents:
        raise ValueError(f"frame {frame.frame_index}: no visible opponents")
    pos, vel = _team_arrays(opponents)
    return float(_ttr(pos, vel, np.asarray([player.position], float), cfg.v_max,
                      cfg.reaction_time).min())


def passline_points(start: Sequence[float], end: Sequence[float], step: float = 1.0) -> np.ndarray:
    start = np.asarray(start, float)
    end = np.asarray(end, float)
    n = max(1, int(math.ceil(np.linalg.norm(end - start) / step)))
    return start + (end - start) * np.linspace(0.0, 1.0, n + 1)[:, None]


def time_to_reach_passline(frame: FrameSnapshot, receiver: PlayerState | int,
                           cfg: EdmsConfig | None = None) -> float:
    """Quickest opponent arrival at any sampled point of the ball-to-receiver lane."""
    cfg = cfg or EdmsConfig()
    if isinstance(receiver, int):
        receiver = frame.player(receiver)
    opponents = frame.team_players(other_team(receiver.team), visible_only=True)
    if not opponents:
        raise ValueError(f"frame {frame.frame_index}: no visible opponents")
    pos, vel = _team_arrays(opponents)
    pts = passline_points(frame.ball.position, receiver.position, cfg.passline_step)
    return float(_ttr(pos, vel, pts, cfg.v_max, cfg.reaction_time).min())


@dataclass(frozen=True)
class PassScaling:
    """Min-max constants for the four pass-score inputs, fitted over a dataset."""

    mins: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    maxs: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    @classmethod
    def fit(cls, rows: np.ndarray) -> "PassScaling":
        rows = np.asarray(rows, float).reshape(-1, 4)
        if len(rows) == 0:
            return cls()
        return cls(tuple(float(v) for v in rows.min(axis=0)),
                   tuple(float(v) for v in rows.max(axis=0)))

    def apply(self, values: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.mins)
        span = np.asarray(self.maxs) - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (np.asarray(values, float) - lo) / safe, 0.0)

    def to_dict(self) -> dict:
        return {"mins": list(self.mins), "maxs": list(self.maxs)}

    @classmethod
    def from_dict(cls, data: dict) -> "PassScaling":
        return cls(tuple(float(v) for v in data["mins"]), tuple(float(v) for v in data["maxs"]))


def pass_score(dist_ball: float, space: float, ttr_player: float, ttr_passline: float,
               weights: Sequence[float] = (0.5, 0.3, 0.2, 0.2)) -> float:
    """Weighted sum of the (already scaled) pass-score inputs."""
    values = np.array([dist_ball, space, ttr_player, ttr_passline], dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"pass_score inputs must be finite, got {values.tolist()}")
    return float(np.dot(np.asarray(weights, float), values))


def _point_in_triangle(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> bool:
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    d1, d2, d3 = cross(a, b, p), cross(b, c, p), cross(c, a, p)
    has_neg = d1 < 0 or d2 < 0 or d3 < 0
    has_pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (has_neg and has_pos)


def shot_score(frame: FrameSnapshot, shooter: PlayerState | int, cfg: EdmsConfig | None = None,
               pitch: PitchConfig | None = None, n_angles: int | None = None) -> float | None:
    """Unblocked share of the goalmouth seen from the shooter, or None beyond range.

    Only outfield defenders inside the shooter-post-post triangle count. Each
    blocks a ray with probability ``1 - d / w`` for lateral distance ``d < w``
    to the ray (``w`` the block half-width), 0 beyond. Blocks
    combine independently and the block probability is averaged over the
    goalmouth angles with the trapezoid rule.
    """
    cfg = cfg or EdmsConfig()
    pitch = pitch or PitchConfig()
    n = n_angles or cfg.shot_n_angles
    if isinstance(shooter, int):
        shooter = frame.player(shooter)
    s = np.asarray(shooter.position, float)
    if abs(s[0]) > pitch.half_length or abs(s[1]) > pitch.half_width:
        raise ValueError(f"shooter {shooter.player_id} at {tuple(s)} is not on the pitch")
    goal = np.array([pitch.half_length, 0.0])
    if np.linalg.norm(goal - s) > cfg.shot_range:
        return None
    half_goal = pitch.goal_width / 2.0
    post_a = np.array([pitch.half_length, -half_goal])
    post_b = np.array([pitch.half_length, half_goal])
    blockers = np.array([
        p.position for p in frame.team_players(other_team(shooter.team), visible_only=True)
        if not p.is_goalkeeper and _point_in_triangle(np.asarray(p.position, float), s, post_a, post_b)
    ], dtype=float).reshape(-1, 2)
    if len(blockers) == 0:
        return 1.0
    theta_a = math.atan2(post_a[1] - s[1], post_a[0] - s[0])
    theta_b = math.atan2(post_b[1] - s[1], post_b[0] - s[0])
    thetas = np.linspace(theta_a, theta_b, n)
    rays = np.column_stack([np.cos(thetas), np.sin(thetas)])
    rel = blockers - s
    along = rays @ rel.T  # (n, k)
    lateral = np.abs(rays[:, 0:1] * rel[None, :, 1] - rays[:, 1:2] * rel[None, :, 0])
    lateral = np.where(along > 0, lateral, np.linalg.norm(rel, axis=1)[None, :])
    p_block = np.clip(1.0 - lateral / cfg.shot_block_half_width, 0.0, 1.0)
    block = 1.0 - np.prod(1.0 - p_block, axis=1)
    span = theta_b - theta_a
    if span <= 0:
        mean_block = float(block[0])
    else:
        mean_block = float(_trapezoid(block, thetas) / span)
    return float(min(1.0, max(0.0, 1.0 - mean_block)))


def long_ball_score(frame: FrameSnapshot, team: str | None = None,
                    pitch: PitchConfig | None = None) -> np.ndarray:
    """One-hot (left, centre, right) for the lateral third holding the tallest attacker."""
    pitch = pitch or PitchConfig()
    team = team or frame.possession_team
    players = frame.team_players(team)
    if not players:
        raise ValueError(f"frame {frame.frame_index}: no players for team {team}")
    for p in players:
        if p.height is None or not np.isfinite(p.height) or p.height <= 0:
            raise ValueError(f"player {p.player_id}: missing height")
    tallest = min(players, key=lambda p: (-p.height, p.jersey))
    y = tallest.position[1]
    third = pitch.width / 6.0
    out = np.zeros(3)
    if y > third:
        out[0] = 1.0
    elif y < -third:
        out[2] = 1.0
    else:
        out[1] = 1.0
    return out


def goal_geometry(point: Sequence[float], goal: str = "opponent",
                  pitch: PitchConfig | None = None) -> tuple[float, float]:
    """Distance to a goal centre and the absolute angle of that ray to the x-axis."""
    pitch = pitch or PitchConfig()
    if goal == "opponent":
        gx = pitch.half_length
    elif goal == "own":
        gx = -pitch.half_length
    else:
        raise ValueError(f"goal must be 'own' or 'opponent', got {goal!r}")
    dx = gx - point[0]
    dy = -point[1]
    return float(math.hypot(dx, dy)), float(math.atan2(abs(dy), abs(dx)))


def formation_onehot(name: str | None, vocabulary: Sequence[str]) -> np.ndarray:
    out = np.zeros(len(vocabulary))
    if name in vocabulary:
        out[vocabulary.index(name)] = 1.0
    elif "other" in vocabulary:
        out[vocabulary.index("other")] = 1.0
    return out


@dataclass
class EdmsState:
    """Frame-level EDMS blocks plus the per-player vector view used for learning."""

    absolute: np.ndarray
    attackers: tuple[int, ...]  # attacking team ids ordered by jersey
    off_ball_ids: tuple[int, ...]  # the 10 rows of the off-ball block
    off_ball: dict[int, np.ndarray]  # raw off-ball rows for every off-ball attacker
    intra: np.ndarray
    inter: np.ndarray
    on_ball_player: int | None
    context: str
    formations: tuple[str, ...] = field(default=(), repr=False)

    def off_ball_block(self) -> np.ndarray:
        return np.stack([self.off_ball[pid] for pid in self.off_ball_ids])

    def rescore(self, scaling: PassScaling, weights: Sequence[float] = (0.5, 0.3, 0.2, 0.2)) -> "EdmsState":
        rows = {}
        for pid, row in self.off_ball.items():
            row = row.copy()
            scaled = scaling.apply(row[[0, 3, 1, 2]])
            row[-1] = pass_score(*scaled, weights=weights)
            rows[pid] = row
        return replace(self, off_ball=rows)

    def pass_inputs(self) -> np.ndarray:
        """Raw (dist_ball, space, ttr_player, ttr_passline) per off-ball attacker."""
        return np.array([row[[0, 3, 1, 2]] for row in self.off_ball.values()]).reshape(-1, 4)

    def vector(self, subject: int) -> np.ndarray:
        """Per-player layout: absolute | subject | off-ball rows | intra | inter."""
        if subject not in self.attackers:
            raise KeyError(f"player {subject} is not on the attacking team")
        on_ball = subject == self.on_ball_player
        subj_row = np.zeros(len(OFF_BALL_COLUMNS)) if on_ball else self.off_ball[subject]
        return np.concatenate([
            self.absolute,
            [1.0 if on_ball else 0.0],
            subj_row,
            self.off_ball_block().ravel(),
            self.intra,
            self.inter,
        ])


def edms_layout(formations: Sequence[str]) -> list[str]:
    names = ["offside_dist_attack", "offside_dist_defend"]
    names += [f"formation_attack_{f}" for f in formations]
    names += [f"formation_defend_{f}" for f in formations]
    names += ["subject_on_ball"] + [f"subject_{c}" for c in OFF_BALL_COLUMNS]
    for r in range(N_OFF_BALL_ROWS):
        names += [f"offball{r}_{c}" for c in OFF_BALL_COLUMNS]
    names += list(INTRA_COLUMNS) + list(INTER_COLUMNS)
    return names


def _nearest_attacker_to_ball(frame: FrameSnapshot, team: str) -> PlayerState:
    ball = np.asarray(frame.ball.position)
    return min(frame.team_players(team),
               key=lambda p: (float(np.sum((np.asarray(p.position) - ball) ** 2)), p.jersey))


def assemble_state(frame: FrameSnapshot, context: str, surface: ImportanceSurface | None = None,
                   cfg: EdmsConfig | None = None, pitch: PitchConfig | None = None,
                   transition: int = 0, scaling: PassScaling | None = None) -> EdmsState:
    """Compute every EDMS block for a normalized frame."""
    cfg = cfg or EdmsConfig()
    pitch = pitch or PitchConfig()
    surface = surface or ImportanceSurface.from_config(cfg)
    scaling = scaling or PassScaling()
    if context not in (INTRA, INTER):
        raise ValueError(f"context must be 'intra' or 'inter', got {context!r}")
    if frame.attack_direction != 1:
        raise ValueError(f"frame {frame.frame_index}: frame is not normalized")
    team = frame.possession_team
    opp = other_team(team)
    attackers = sorted(frame.team_players(team), key=lambda p: p.jersey)
    carrier = None
    if frame.on_ball_player is not None:
        candidate = frame.player(frame.on_ball_player)
        if candidate.team == team:
            carrier = candidate
    if context == INTRA and carrier is None:
        raise ValueError(f"frame {frame.frame_index}: intra context needs an attacking on-ball player")
    if context == INTER:
        carrier_ref = _nearest_attacker_to_ball(frame, team)
        on_ball_id = None
    else:
        carrier_ref = carrier
        on_ball_id = carrier.player_id

    space = SpaceField(frame, cfg, pitch, surface)
    ball = np.asarray(frame.ball.position, float)
    ball_vel = np.asarray(frame.ball.velocity, float)

    line_att = offside_line(frame, team)
    line_def = -offside_line(mirror_frame(frame), opp)
    formations = frame.formations or {}
    absolute = np.concatenate([
        [line_att - ball[0], ball[0] - line_def],
        formation_onehot(formations.get(team), cfg.formations),
        formation_onehot(formations.get(opp), cfg.formations),
    ])

    opp_players = frame.team_players(opp, visible_only=True)
    opp_pos, opp_vel = _team_arrays(opp_players)
    off_ball: dict[int, np.ndarray] = {}
    for p in attackers:
        if p.player_id == on_ball_id:
            continue
        dist = float(np.linalg.norm(np.asarray(p.position) - ball))
        ttr_p = float(_ttr(opp_pos, opp_vel, np.asarray([p.position], float),
                           cfg.v_max, cfg.reaction_time).min())
        lane = passline_points(ball, p.position, cfg.passline_step)
        ttr_l = float(_ttr(opp_pos, opp_vel, lane, cfg.v_max, cfg.reaction_time).min())
        s = space.score(p)
        deltas = space.deltas(p)
        scaled = scaling.apply(np.array([dist, s, ttr_p, ttr_l]))
        ps = pass_score(*scaled, weights=cfg.pass_weights)
        off_ball[p.player_id] = np.concatenate([[dist, ttr_p, ttr_l, s], deltas, [ps]])
    off_ids = tuple(p.player_id for p in attackers if p.player_id != carrier_ref.player_id)
    assert len(off_ids) == N_OFF_BALL_ROWS

    intra = np.zeros(len(INTRA_COLUMNS))
    inter = np.zeros(len(INTER_COLUMNS))
    if context == INTRA:
        ttb = float(_ttr(opp_pos, opp_vel, ball[None, :], cfg.v_max, cfg.reaction_time).min())
        dist_g, ang_g = goal_geometry(carrier.position, "opponent", pitch)
        shot = shot_score(frame, carrier, cfg, pitch)
        intra = np.concatenate([
            [1.0, ttb, dist_g, ang_g],
            space.deltas(carrier, carry_ball=True),
            [0.0 if shot is None else shot, 0.0 if shot is None else 1.0],
            long_ball_score(frame, team, pitch),
        ])
    else:
        att_pos, att_vel = _team_arrays(frame.team_players(team, visible_only=True))
        ttb_att = float(_ttr(att_pos, att_vel, ball[None, :], cfg.v_max, cfg.reaction_time).min())
        ttb_def = float(_ttr(opp_pos, opp_vel, ball[None, :], cfg.v_max, cfg.reaction_time).min())
        d_own, a_own = goal_geometry(ball, "own", pitch)
        d_opp, a_opp = goal_geometry(ball, "opponent", pitch)
        inter = np.array([1.0, ttb_att, ttb_def, d_own, a_own, d_opp, a_opp,
                          float(np.linalg.norm(ball_vel)), 1.0 if transition else 0.0])

    return EdmsState(
        absolute=absolute,
        attackers=tuple(p.player_id for p in attackers),
        off_ball_ids=off_ids,
        off_ball=off_ball,
        intra=intra,
        inter=inter,
        on_ball_player=on_ball_id,
        context=context,
        formations=tuple(cfg.formations),
    )


PVS_OBJECTS = 23


def assemble_pvs(frame: FrameSnapshot) -> np.ndarray:
    """Positions and velocities: home by jersey, away by jersey, then the ball."""
    rows = []
    for team in (HOME, AWAY):
        players = sorted(frame.team_players(team), key=lambda p: p.jersey)
        if len(players) != 11:
            raise ValueError(f"frame {frame.frame_index}: team {team} has {len(players)} players")
        rows += [(*p.position, *p.velocity) for p in players]
    if frame.ball is None:
        raise ValueError(f"frame {frame.frame_index}: ball missing")
    rows.append((*frame.ball.position, *frame.ball.velocity))
    return np.asarray(rows, dtype=float).ravel()


def pvs_slots(frame: FrameSnapshot) -> list[int]:
    """Player ids in PVS slot order (home by jersey, then away by jersey)."""
    out = []
    for team in (HOME, AWAY):
        out += [p.player_id for p in sorted(frame.team_players(team), key=lambda p: p.jersey)]
    return out


def pvs_vector(frame: FrameSnapshot, subject: int) -> np.ndarray:
    """PVS plus a one-hot of the subject's slot and an on-ball flag."""
    slots = pvs_slots(frame)
    onehot = np.zeros(22)
    onehot[slots.index(subject)] = 1.0
    return np.concatenate([assemble_pvs(frame), onehot, [1.0 if subject == frame.on_ball_player else 0.0]])


def pvs_layout() -> list[str]:
    names = []
    for team in (HOME, AWAY):
        for j in range(11):
            names += [f"{team}{j}_{c}" for c in ("x", "y", "vx", "vy")]
    names += ["ball_x", "ball_y", "ball_vx", "ball_vy"]
    names += [f"subject_slot{j}" for j in range(22)] + ["subject_on_ball"]
    return names


__all__ = [
    "ImportanceSurface", "PitchGrid", "DominantRegion", "SpaceField", "EdmsState", "PassScaling",
    "importance", "dominant_region", "space_score", "delta_space_score_8dir", "dribble_score",
    "time_to_reach_point", "time_to_reach_player", "time_to_reach_passline", "pass_score",
    "shot_score", "long_ball_score", "goal_geometry", "assemble_state", "assemble_pvs",
    "pvs_vector", "edms_layout", "pvs_layout", "is_offside", "INTRA", "INTER",
]
