import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pitchrl.config import EdmsConfig, PitchConfig
from pitchrl.edms import (
    DIRECTIONS,
    INTER,
    INTRA,
    N_OFF_BALL_ROWS,
    ImportanceSurface,
    PassScaling,
    assemble_pvs,
    assemble_state,
    delta_space_score_8dir,
    dominant_region,
    dribble_score,
    edms_layout,
    goal_geometry,
    importance,
    long_ball_score,
    pass_score,
    passline_points,
    pvs_layout,
    pvs_vector,
    shot_score,
    space_score,
    time_to_reach_passline,
    time_to_reach_player,
    time_to_reach_point,
)
from pitchrl.pitch import HOME, PlayerState, mirror_frame

from conftest import HOME_BASE, make_frame, random_frame
from oracles import moved_frame, space_score_oracle, voronoi_scan

SURFACE = ImportanceSurface()
FAR_AWAY = [(-45, -30 + 6 * k) for k in range(11)]  # opponents packed near their own goal line


def _with_away_far(home, ball=(0.0, 0.0), on_ball=None, **kw):
    away = [(-x, y) for x, y in FAR_AWAY]
    return make_frame(home, away, ball=ball, on_ball=on_ball, **kw)


# --- Voronoi -------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([1.0, 2.0]))
def test_dominant_region_matches_scan(seed, resolution):
    f = random_frame(np.random.default_rng(seed))
    owner, *_ = voronoi_scan(f, resolution)
    np.testing.assert_array_equal(dominant_region(f, resolution).owner, owner)


def test_dominant_region_tie_goes_to_lower_id():
    # x centres are integers at 1 m, so the cell at (0, 0.5) is equidistant from 2 and 13
    home = list(HOME_BASE)
    away = [(-x, y) for x, y in HOME_BASE]
    home[1] = (-1.0, 0.0)
    away[1] = (1.0, 0.0)
    f = make_frame(home, away)
    region = dominant_region(f, 1.0)
    xs, ys = region.grid.centers()
    assert xs[52] == 0.0 and ys[34] == 0.5
    assert region.owner[52, 34] == 2
    swapped = make_frame(away, home, possession="away")
    assert dominant_region(swapped, 1.0).owner[52, 34] == 2


def test_moving_player_projected_half_a_second_ahead():
    home = list(HOME_BASE)
    home[9] = (0.0, 0.0)
    vel = [(0, 0)] * 11
    vel[9] = (10.0, 0.0)
    f = make_frame(home, home_vel=vel, away=[(x + 0.0, y) for x, y in FAR_AWAY])
    owner = dominant_region(f, 1.0).owner
    # projected position is (5, 0); the cell centred at (4.5, 0.5) belongs to player 10
    assert owner[int(4.5 + 52.5), int(0.5 + 34)] == 10


# --- space score ---------------------------------------------------------

def test_space_scores_partition_the_surface_integral():
    f = random_frame(np.random.default_rng(3))
    f = replace(f, players=tuple(replace(p, position=(min(p.position[0], -1.0), p.position[1]))
                                 for p in f.players))  # nobody offside
    grid = dominant_region(f, 1.0).grid
    gx, gy = np.meshgrid(*grid.centers(), indexing="ij")
    total = SURFACE(gx, gy).sum() * grid.cell_area / PitchConfig().area
    got = sum(space_score(f, p.player_id) for p in f.players)
    assert got == pytest.approx(total, rel=1e-9)


def test_lone_attacker_owns_the_attacking_half():
    # everyone else stacked at (-40, 0): the bisector is x = 0, a column of ties won by id 1
    home = [(40.0, 0.0)] + [(-40.0, 0.0)] * 10
    f = make_frame(home, [(-40.0, 0.0)] * 11, ball=(40.0, 0.0), on_ball=1)
    cx = -52.5 + np.arange(105) + 0.5
    cy = -34 + np.arange(68) + 0.5
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    expected = SURFACE(gx, gy)[gx >= 0].sum() / (105 * 68)
    assert space_score(f, 1) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_space_score_matches_full_recomputation(seed):
    rng = np.random.default_rng(seed)
    f = random_frame(rng)
    pid = int(rng.integers(1, 23))
    assert space_score(f, pid) == pytest.approx(space_score_oracle(f, pid, SURFACE), abs=1e-15)


def test_offside_player_scores_zero_and_onside_scores_positive():
    home = [(-50, 0)] + [(10 - k, -20 + 4 * k) for k in range(9)] + [(40, 10)]
    away = [(50, 0), (30, 5)] + [(20 - k, -25 + 5 * k) for k in range(9)]
    f = make_frame(home, away, ball=(10, 0), on_ball=2)
    assert space_score(f, 11) == 0.0
    onside = replace(f, players=tuple(replace(p, position=(29.0, 10.0)) if p.player_id == 11 else p
                                      for p in f.players))
    assert space_score(onside, 11) > 0.0


# --- deltas --------------------------------------------------------------

@settings(max_examples=10, deadline=None)
@given(st.integers(0, 100_000), st.booleans())
def test_deltas_match_recomputed_moved_frames(seed, carry):
    rng = np.random.default_rng(seed)
    f = random_frame(rng)
    pid = f.on_ball_player if carry else int(rng.integers(2, 12))
    got = delta_space_score_8dir(f, pid, carry_ball=carry)
    base = space_score_oracle(f, pid, SURFACE)
    for k, step in enumerate(DIRECTIONS):
        g = moved_frame(f, pid, step, carry_ball=carry)
        assert got[k] == pytest.approx(space_score_oracle(g, pid, SURFACE) - base, abs=1e-14)


def test_deltas_mirror_across_the_x_axis():
    f = random_frame(np.random.default_rng(11))
    flipped = replace(f, players=tuple(replace(p, position=(p.position[0], -p.position[1]),
                                               velocity=(p.velocity[0], -p.velocity[1]))
                                       for p in f.players),
                      ball=replace(f.ball, position=(f.ball.position[0], -f.ball.position[1])))
    for pid in (3, 7):
        a = delta_space_score_8dir(f, pid)
        b = delta_space_score_8dir(flipped, pid)
        np.testing.assert_allclose(b, a[[(8 - k) % 8 for k in range(8)]], atol=1e-9)


def test_forward_step_gains_more_than_backward_for_isolated_attacker():
    home = [(-50, 0)] + [(-20, -30 + 6 * k) for k in range(9)] + [(-5.0, 0.0)]
    f = _with_away_far(home)
    d = delta_space_score_8dir(f, 11)
    assert d[0] > d[4]


def test_dribble_requires_carrier_and_moves_ball():
    f = make_frame()
    with pytest.raises(ValueError):
        dribble_score(f)
    f = make_frame(on_ball=10, ball=(-5, -8))
    assert dribble_score(f).shape == (8,)


# --- time to reach -------------------------------------------------------

def _player(pos, vel=(0.0, 0.0), pid=1, team=HOME):
    return PlayerState(pid, team, pid, tuple(map(float, pos)), tuple(map(float, vel)))


def test_time_to_reach_examples():
    assert time_to_reach_point(_player((3, 4)), (3, 4)) == 0.0
    assert time_to_reach_point(_player((0, 0)), (8, 0)) == pytest.approx(1.0)
    assert time_to_reach_point(_player((0, 0), (4, 0)), (8, 0), reaction_time=0.5) == pytest.approx(0.75)


@settings(max_examples=50, deadline=None)
@given(st.floats(-50, 50), st.floats(-30, 30), st.floats(-50, 50), st.floats(-30, 30))
def test_time_to_reach_is_lipschitz_in_target(x, y, dx, dy):
    p = _player((0, 0))
    a = time_to_reach_point(p, (x, y))
    b = time_to_reach_point(p, (x + dx * 0.1, y + dy * 0.1))
    assert abs(a - b) <= math.hypot(dx * 0.1, dy * 0.1) / 8.0 + 1e-12


def test_passline_sampling_and_examples():
    pts = passline_points((0, 0), (10, 0))
    assert len(pts) == 11 and pts[-1].tolist() == [10.0, 0.0]
    home = [(-50, 0)] + [(-30, -30 + 6 * k) for k in range(9)] + [(10.0, 0.0)]
    away = [(-x, y) for x, y in FAR_AWAY]
    away[5] = (5.0, 0.0)  # defender on the lane midpoint
    f = make_frame(home, away, ball=(0.0, 0.0))
    assert time_to_reach_passline(f, 11) == 0.0
    away[5] = (5.0, 8.0)
    f = make_frame(home, away, ball=(0.0, 0.0))
    assert time_to_reach_passline(f, 11) == pytest.approx(1.0)
    assert time_to_reach_passline(f, 11) <= time_to_reach_player(f, 11)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_passline_never_slower_than_reaching_receiver(seed):
    rng = np.random.default_rng(seed)
    f = random_frame(rng)
    pid = int(rng.integers(2, 12))
    assert time_to_reach_passline(f, pid) <= time_to_reach_player(f, pid) + 1e-12


# --- pass score ----------------------------------------------------------

def test_pass_score_examples():
    assert pass_score(0, 0, 0, 0) == 0.0
    assert pass_score(1, 1, 1, 1) == pytest.approx(1.2)
    assert pass_score(0.5, 0, 0, 0) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        pass_score(float("nan"), 0, 0, 0)


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4),
       st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.floats(-3, 3))
def test_pass_score_is_linear(a, b, c):
    lhs = pass_score(*(np.array(a) + c * np.array(b)))
    assert lhs == pytest.approx(pass_score(*a) + c * pass_score(*b), abs=1e-9)


def test_pass_scaling_round_trip_and_constant_columns():
    s = PassScaling.fit(np.array([[0, 1, 2, 3], [4, 1, 6, 7.0]]))
    np.testing.assert_allclose(s.apply([2, 1, 4, 5]), [0.5, 0.0, 0.5, 0.5])
    assert PassScaling.from_dict(s.to_dict()) == s


# --- shot score ----------------------------------------------------------

def _shot_frame(shooter, defenders):
    home = [(-50, 0)] + [(-30, -30 + 6 * k) for k in range(9)] + [shooter]
    away = [(52.0, 0.0)] + list(defenders) + [(-40.0, -30 + 6 * k) for k in range(10 - len(defenders))]
    return make_frame(home, away, ball=shooter, on_ball=11)


def test_shot_free_triangle_is_exactly_one():
    assert shot_score(_shot_frame((40, 5), []), 11) == 1.0


def test_shot_out_of_range_is_none():
    assert shot_score(_shot_frame((21.5, 0), []), 11) is None
    assert shot_score(_shot_frame((22.5, 0), []), 11) is not None


def test_shot_defender_on_ray_lowers_and_approach_is_monotone():
    prev = 1.0
    for y in (3.0, 2.0, 1.0, 0.5, 0.0):
        s = shot_score(_shot_frame((35, 0), [(45.0, y)]), 11)
        assert s <= prev + 1e-12
        prev = s
    assert prev < 1.0


def test_goalkeeper_never_blocks():
    f = _shot_frame((40, 0), [])
    assert f.player(12).is_goalkeeper
    gk_on_line = replace(f, players=tuple(replace(p, position=(45.0, 0.0)) if p.player_id == 12 else p
                                          for p in f.players))
    assert shot_score(gk_on_line, 11) == 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(25, 52), st.floats(-15, 15), st.lists(
    st.tuples(st.floats(25, 52.5), st.floats(-10, 10)), max_size=4))
def test_shot_score_in_unit_interval(x, y, defenders):
    s = shot_score(_shot_frame((x, y), defenders), 11)
    assert s is None or 0.0 <= s <= 1.0


# --- small geometric features --------------------------------------------

def test_long_ball_picks_tallest_thirds():
    for y, k in ((20.0, 0), (0.0, 1), (-20.0, 2)):
        home = list(HOME_BASE)
        home[9] = (0.0, y)
        f = make_frame(home, heights={10: 199.0})
        np.testing.assert_array_equal(long_ball_score(f), np.eye(3)[k])


def test_goal_geometry_examples_and_symmetry():
    assert goal_geometry((52.5, 0)) == (0.0, 0.0)
    d, a = goal_geometry((32.5, 0))
    assert d == pytest.approx(20.0) and a == 0.0
    assert goal_geometry((10, 7)) == goal_geometry((10, -7))
    d, a = goal_geometry((-42.5, 10), "own")
    assert d == pytest.approx(math.hypot(10, 10)) and a == pytest.approx(math.pi / 4)


def test_importance_surface_shape():
    assert importance((17.5, 0), SURFACE) == pytest.approx(0.5)
    assert importance((5, 9), SURFACE) == importance((5, -9), SURFACE)
    grid = dominant_region(make_frame(), 1.0).grid
    gx, gy = np.meshgrid(*grid.centers(), indexing="ij")
    i, j = np.unravel_index(np.argmax(SURFACE(gx, gy)), gx.shape)
    assert gx[i, j] == 52.0 and abs(gy[i, j]) == 0.5


# --- state assembly ------------------------------------------------------

def test_assemble_state_layout_and_blocks():
    f = make_frame(on_ball=10, ball=(-5, -8))
    st_ = assemble_state(f, INTRA)
    names = edms_layout(EdmsConfig().formations)
    assert len(names) == 186
    assert len(st_.vector(2)) == 186
    assert st_.off_ball_block().shape == (N_OFF_BALL_ROWS, 13)
    assert st_.inter.tolist() == [0.0] * 9 and st_.intra[0] == 1.0
    v = st_.vector(10)
    assert v[names.index("subject_on_ball")] == 1.0
    np.testing.assert_array_equal(assemble_state(f, INTRA).vector(3), st_.vector(3))


def test_inter_context_zeroes_the_intra_block():
    f = make_frame(ball=(0, 0))
    st_ = assemble_state(f, INTER, transition=1)
    assert np.all(st_.intra == 0.0)
    assert st_.inter[0] == 1.0 and st_.inter[-1] == 1.0
    assert len(st_.off_ball_ids) == N_OFF_BALL_ROWS
    with pytest.raises(ValueError):
        assemble_state(f, INTRA)


def test_assemble_state_rejects_unnormalized_frames():
    with pytest.raises(ValueError):
        assemble_state(make_frame(on_ball=10, attack_direction=-1), INTRA)


def test_pvs_vector_layout_and_mirror():
    f = random_frame(np.random.default_rng(5))
    assert len(assemble_pvs(f)) == 92
    assert len(pvs_vector(f, 2)) == len(pvs_layout()) == 92 + 23
    still = make_frame()
    assert np.all(assemble_pvs(still).reshape(23, 4)[:, 2:] == 0.0)
    a = assemble_pvs(f).reshape(23, 4)
    b = assemble_pvs(mirror_frame(f)).reshape(23, 4)
    np.testing.assert_allclose(b[:, [0, 2]], -a[:, [0, 2]])
    np.testing.assert_allclose(b[:, [1, 3]], a[:, [1, 3]])


def test_defender_on_central_ray_converges_under_refinement():
    f = _shot_frame((35, 0), [(45.0, 0.0)])
    coarse, fine = shot_score(f, 11, n_angles=101), shot_score(f, 11, n_angles=201)
    assert coarse < 1.0 and abs(coarse - fine) < 1e-4


def test_dribble_forward_gain_into_empty_half_and_goal_line_clipping():
    # nobody in the opposing half; defenders level with the carrier on both flanks, so a
    # forward step tilts both bisectors towards the high-importance cells near goal
    home = [(-50, 0)] + [(-45, -30 + 6 * k) for k in range(9)] + [(-2.0, 0.0)]
    away = [(-2.0, 20.0), (-2.0, -20.0)] + [(-45, -27 + 6 * k) for k in range(9)]
    f = make_frame(home, away, ball=(-2.0, 0.0), on_ball=11)
    d = dribble_score(f)
    assert d[0] > 0.0 and d[0] > d[4]
    home[-1] = (52.5, 0.0)
    g = make_frame(home, away, ball=(52.5, 0.0), on_ball=11)  # forward move clipped to the line
    forward = moved_frame(g, 11, DIRECTIONS[0], carry_ball=True)
    assert forward.player(11).position == (52.5, 0.0)
    assert dribble_score(g)[0] == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_array_equal(dribble_score(g), delta_space_score_8dir(g, 11, carry_ball=True))
