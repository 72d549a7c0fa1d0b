"""Per-player directional Q extraction and per-team Q aggregation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .actions import MOVE_ACTIONS, OFF_BALL_ACTIONS, OFF_BALL_SLICE, ON_BALL_MASK
from .rlearn import QNet, apply_mask, chosen_q, forward

log = logging.getLogger(__name__)

TEAM_COLUMNS = ("team", "mean_terminal_q", "n_sequences", "statistic")
TEAM_STATISTIC = "chosen_action_q_at_terminal_step"


@dataclass(frozen=True)
class DirectionalQ:
    player_id: int
    frame_index: int
    q: np.ndarray  # 9 values: move_0 .. move_315, stay
    top_k: tuple[int, ...]  # indices into the 8 movement entries, best first

    @property
    def labels(self) -> tuple[str, ...]:
        return OFF_BALL_ACTIONS


def _find_trajectory(trajectories: Sequence, frame_index: int, player_id: int):
    for tr in trajectories:
        if tr.player_id != player_id:
            continue
        hits = np.flatnonzero(np.asarray(tr.frames) == frame_index)
        if hits.size:
            return tr, int(hits[0])
    raise KeyError(f"no trajectory of player {player_id} covers frame {frame_index}")


def extract_offball_q(net: QNet, trajectories: Sequence, frame_index: int, player_id: int,
                      top_k: int = 3, mask_value: float = -9999.0) -> DirectionalQ:
    """Masked off-ball Q of ``player_id`` at ``frame_index``, replaying the episode prefix."""
    tr, t = _find_trajectory(trajectories, frame_index, player_id)
    mask = np.asarray(tr.masks[t], dtype=bool)
    if np.array_equal(mask, ON_BALL_MASK):
        raise ValueError(
            f"player {player_id} carries the ball at frame {frame_index}; "
            "directional Q is defined for off-ball players, read the on-ball entries instead")
    q = forward(net, np.asarray(tr.states)[: t + 1])[-1]
    off = apply_mask(q, mask, mask_value)[OFF_BALL_SLICE]
    moves = off[: len(MOVE_ACTIONS)]
    order = np.argsort(-moves, kind="stable")[: max(0, min(top_k, len(MOVE_ACTIONS)))]
    return DirectionalQ(player_id, frame_index, off.copy(), tuple(int(i) for i in order))


@dataclass(frozen=True)
class TeamQSummary:
    team: str
    mean_terminal_q: float
    n_sequences: int


def team_aggregate(net: QNet, trajectories: Sequence, teams: Sequence[str] | None = None
                   ) -> list[TeamQSummary]:
    """Per-team mean over sequences of the players' chosen-action Q at the last step."""
    per_episode: dict[tuple, list[float]] = {}
    for tr in trajectories:
        q = forward(net, np.asarray(tr.states))
        last = chosen_q(q, np.asarray(tr.actions))[-1]
        per_episode.setdefault((tr.team, tr.episode), []).append(float(last))
    by_team: dict[str, list[float]] = {}
    for (team, _), values in per_episode.items():
        by_team.setdefault(team, []).append(float(np.mean(values)))
    out = []
    for team in (teams if teams is not None else sorted(by_team)):
        values = by_team.get(team)
        if not values:
            log.warning("team %s has no sequences; omitted", team)
            continue
        out.append(TeamQSummary(team, float(np.mean(values)), len(values)))
    return out


def write_team_csv(path: str | Path, rows: Sequence[TeamQSummary]) -> None:
    from .ingest import _atomic_write_rows
    _atomic_write_rows(path, TEAM_COLUMNS,
                       [(r.team, repr(r.mean_terminal_q), r.n_sequences, TEAM_STATISTIC) for r in rows])
