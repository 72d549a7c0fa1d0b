"""The 16-way discrete action set and its on-ball / off-ball validity masks."""

from __future__ import annotations

import math

import numpy as np

ON_BALL_ACTIONS = (
    "pass",
    "through_pass",
    "shot",
    "cross",
    "dribble",
    "defensive_action",
    "idle_on_ball",
)
MOVE_ACTIONS = tuple(f"move_{a}" for a in range(0, 360, 45))
OFF_BALL_ACTIONS = MOVE_ACTIONS + ("stay",)
ACTIONS = ON_BALL_ACTIONS + OFF_BALL_ACTIONS
N_ACTIONS = len(ACTIONS)
ACTION_INDEX = {name: i for i, name in enumerate(ACTIONS)}
ON_BALL_SLICE = slice(0, len(ON_BALL_ACTIONS))
OFF_BALL_SLICE = slice(len(ON_BALL_ACTIONS), N_ACTIONS)
STAY = ACTION_INDEX["stay"]
IDLE_ON_BALL = ACTION_INDEX["idle_on_ball"]

ON_BALL_MASK = np.zeros(N_ACTIONS, dtype=bool)
ON_BALL_MASK[ON_BALL_SLICE] = True
OFF_BALL_MASK = ~ON_BALL_MASK

# provider vocabulary -> on-ball class; defensive events collapse to one class
PROVIDER_ACTIONS = {
    "pass": "pass",
    "short_pass": "pass",
    "long_pass": "pass",
    "through_pass": "through_pass",
    "through_ball": "through_pass",
    "shot": "shot",
    "goal": "shot",
    "cross": "cross",
    "dribble": "dribble",
    "carry": "dribble",
    "take_on": "dribble",
    "defensive_action": "defensive_action",
    "interception": "defensive_action",
    "clearance": "defensive_action",
    "tackle": "defensive_action",
    "block": "defensive_action",
    "ball_recovery": "defensive_action",
    "recovery": "defensive_action",
}
# actions after which the carrier no longer controls the ball
RELEASING_ACTIONS = {"pass", "through_pass", "shot", "cross"}


def map_provider_action(action_type: str) -> str:
    key = action_type.strip().lower().replace(" ", "_").replace("-", "_")
    if key not in PROVIDER_ACTIONS:
        raise ValueError(f"unmappable provider action {action_type!r}")
    return PROVIDER_ACTIONS[key]


def action_mask(is_on_ball: bool) -> np.ndarray:
    return (ON_BALL_MASK if is_on_ball else OFF_BALL_MASK).copy()


def direction_class(vx: float, vy: float, v_stay: float = 0.5) -> int:
    """Off-ball label: stay below ``v_stay``, else the nearest of 8 directions."""
    if math.hypot(vx, vy) < v_stay:
        return STAY
    sector = int(round(math.degrees(math.atan2(vy, vx)) / 45.0)) % 8
    return ACTION_INDEX[MOVE_ACTIONS[sector]]


def mask_to_str(mask: np.ndarray) -> str:
    return "".join("1" if m else "0" for m in mask)


def mask_from_str(text: str) -> np.ndarray:
    if len(text) != N_ACTIONS or set(text) - {"0", "1"}:
        raise ValueError(f"malformed mask {text!r}")
    return np.array([c == "1" for c in text], dtype=bool)
