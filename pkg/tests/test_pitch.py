import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pitchrl.config import PitchConfig
from pitchrl.pitch import (
    AWAY,
    HOME,
    compute_kinematics,
    is_offside,
    mirror_frame,
    normalize_attack_direction,
    offside_line,
)

from conftest import make_frame, random_frame


def test_stationary_series_has_zero_derivatives():
    k = compute_kinematics(np.tile([3.0, -2.0], (20, 1)), 25)
    assert np.all(k.velocity == 0.0)
    assert np.all(k.acceleration == 0.0)


def test_linear_motion_gives_unit_velocity():
    t = np.arange(50) / 25.0
    k = compute_kinematics(np.column_stack([t, np.zeros_like(t)]), 25)
    np.testing.assert_allclose(k.velocity[:, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(k.velocity[:, 1], 0.0, atol=1e-12)
    np.testing.assert_allclose(k.acceleration, 0.0, atol=1e-9)


def test_single_gap_is_restored_exactly():
    t = np.arange(40) / 25.0
    pos = np.column_stack([t, 0.5 * t])
    holed = pos.copy()
    holed[17] = np.nan
    a, b = compute_kinematics(pos, 25), compute_kinematics(holed, 25)
    np.testing.assert_allclose(b.position, a.position, atol=1e-12)
    np.testing.assert_allclose(b.velocity, a.velocity, atol=1e-12)
    assert b.visible.all()


def test_long_gap_flagged_not_visible():
    pos = np.column_stack([np.arange(40.0), np.zeros(40)])
    pos[5:20] = np.nan
    k = compute_kinematics(pos, 25, max_gap=10)
    assert not k.visible[5:20].any()
    assert k.visible[:5].all() and k.visible[20:].all()


@pytest.mark.parametrize("series", [np.zeros((2, 2)), np.full((5, 2), np.nan)])
def test_kinematics_rejects_degenerate_series(series):
    with pytest.raises(ValueError):
        compute_kinematics(series, 25)


def test_kinematics_rejects_non_increasing_timestamps():
    with pytest.raises(ValueError):
        compute_kinematics(np.zeros((4, 2)), 25, timestamps=[0, 1, 1, 2])


def test_normalize_identity_when_already_attacking_plus_x():
    f = make_frame()
    assert normalize_attack_direction(f) is f


def test_normalize_mirrors_x_velocity_and_acceleration():
    home = [(-10, 5)] + [(-30 + k, -20 + 4 * k) for k in range(10)]
    vel = [(2, -1)] + [(0, 0)] * 10
    f = make_frame(home=home, home_vel=vel, attack_direction=-1)
    g = normalize_attack_direction(f)
    p = g.player(1)
    assert p.position == (10, 5)
    assert p.velocity == (-2, -1)
    assert g.attack_direction == 1
    assert normalize_attack_direction(g) == g


def test_normalize_requires_possession_team():
    with pytest.raises(ValueError):
        normalize_attack_direction(make_frame(possession=None, attack_direction=-1))


def test_offside_line_halfway_when_attackers_in_own_half():
    # every home attacker at x < 0
    assert offside_line(make_frame()) == 0.0


def test_offside_line_second_last_defender():
    home = [(-50, 0)] + [(5 + k, -20 + 4 * k) for k in range(10)]
    away = [(40, 0), (35, 5)] + [(30 - k, -25 + 5 * k) for k in range(9)]
    assert offside_line(make_frame(home, away, ball=(10, 0))) == 35.0


def test_offside_line_ball_deeper_than_second_last_defender():
    home = [(-50, 0)] + [(5 + k, -20 + 4 * k) for k in range(10)]
    away = [(40, 0), (20, 5)] + [(10 - k, -25 + 5 * k) for k in range(9)]
    assert offside_line(make_frame(home, away, ball=(30, 0))) == 30.0


def test_offside_line_needs_two_defenders():
    from dataclasses import replace
    f = make_frame()
    players = tuple(replace(p, visible=p.team == HOME or p.player_id == 12) for p in f.players)
    with pytest.raises(ValueError):
        offside_line(replace(f, players=players))


def test_is_offside_only_for_attackers_beyond_line_in_opponent_half():
    home = [(-50, 0)] + [(5 + k, -20 + 4 * k) for k in range(9)] + [(45, 0)]
    away = [(50, 0), (30, 5)] + [(20 - k, -25 + 5 * k) for k in range(9)]
    f = make_frame(home, away, ball=(5, 0))
    assert is_offside(f, f.player(11))
    assert not is_offside(f, f.player(2))
    assert not is_offside(f, f.player(13))  # defenders are never offside


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_offside_line_never_behind_ball_with_attacker_upfield(seed):
    f = random_frame(np.random.default_rng(seed))
    if any(p.position[0] > 0 for p in f.team_players(HOME)):
        assert offside_line(f) >= f.ball.position[0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_is_idempotent_and_mirror_is_an_involution(seed):
    f = random_frame(np.random.default_rng(seed))
    assert mirror_frame(mirror_frame(f)) == f
    m = mirror_frame(f)
    assert normalize_attack_direction(normalize_attack_direction(m)) == normalize_attack_direction(m)


def test_frame_validation():
    f = make_frame()
    f.validate(PitchConfig())
    from dataclasses import replace
    with pytest.raises(ValueError):
        replace(f, players=f.players[:21]).validate()
    with pytest.raises(ValueError):
        replace(f, on_ball_player=99).validate()
    bad = tuple(replace(p, position=(70.0, 0.0)) if p.player_id == 3 else p for p in f.players)
    with pytest.raises(ValueError):
        replace(f, players=bad).validate(PitchConfig())
    assert {p.team for p in f.players} == {HOME, AWAY}
