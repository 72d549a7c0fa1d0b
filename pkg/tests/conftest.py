import numpy as np
import pytest

from pitchrl.pitch import AWAY, HOME, BallState, FrameSnapshot, PlayerState

# a spread-out 4-4-2 (home) and 4-4-2 (away) used as the default background
HOME_BASE = [(-50, 0), (-35, -20), (-35, -7), (-35, 7), (-35, 20),
             (-20, -20), (-20, -7), (-20, 7), (-20, 20), (-5, -8), (-5, 8)]


def make_frame(home=None, away=None, ball=(0.0, 0.0), possession=HOME, on_ball=None,
               home_vel=None, away_vel=None, heights=None, frame_index=0, attack_direction=1,
               ball_vel=(0.0, 0.0)):
    """Frame with home ids 1..11 and away ids 12..22; jersey 1 is the goalkeeper."""
    home = HOME_BASE if home is None else home
    away = [(-x, y) for x, y in HOME_BASE] if away is None else away
    players = []
    for team, pos, vel, base in ((HOME, home, home_vel, 1), (AWAY, away, away_vel, 12)):
        for k, xy in enumerate(pos):
            pid = base + k
            players.append(PlayerState(
                player_id=pid, team=team, jersey=k + 1,
                position=(float(xy[0]), float(xy[1])),
                velocity=tuple(float(v) for v in vel[k]) if vel is not None else (0.0, 0.0),
                height=float(heights.get(pid, 180.0)) if heights else 180.0,
                is_goalkeeper=k == 0))
    return FrameSnapshot(frame_index, frame_index / 25.0, tuple(players),
                         BallState(tuple(float(v) for v in ball), tuple(float(v) for v in ball_vel)),
                         possession, on_ball, attack_direction)


def random_frame(rng, possession=HOME, speed=3.0, on_ball=True):
    home = np.column_stack([rng.uniform(-52.5, 52.5, 11), rng.uniform(-34, 34, 11)])
    away = np.column_stack([rng.uniform(-52.5, 52.5, 11), rng.uniform(-34, 34, 11)])
    hv = rng.normal(0, speed, (11, 2))
    av = rng.normal(0, speed, (11, 2))
    carrier = int(rng.integers(2, 12)) if on_ball else None
    ball = home[carrier - 1] + 0.5 if carrier else rng.uniform(-40, 40, 2)
    ball = np.clip(ball, (-52.5, -34), (52.5, 34))
    return make_frame(home.tolist(), away.tolist(), tuple(ball), possession, carrier,
                      hv.tolist(), av.tolist())


@pytest.fixture
def frame_factory():
    return make_frame


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
