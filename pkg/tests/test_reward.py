import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pitchrl.pitch import AWAY, HOME, BallState
from pitchrl.ingest import PossessionSequence
from pitchrl.reward import (
    CONCEDED_NEXT,
    GOAL,
    OTHER,
    EpvGrid,
    assign_rewards,
    default_epv_grid,
    epv_lookup,
    load_epv_grid,
    load_fot_epv_grid,
    reward_stream,
    save_epv_grid,
)

from conftest import make_frame

RULES = {GOAL: lambda epv: 1.0, CONCEDED_NEXT: lambda epv: -1.0, OTHER: lambda epv: epv}


def oracle_rewards(n, outcome, balls, shots, grid):
    out = [0.0] * n
    for k in shots:
        out[k] = epv_lookup(grid, balls[k])
    out[n - 1] = RULES[outcome](epv_lookup(grid, balls[n - 1]))
    return out


def test_bilinear_lookup_examples():
    grid = EpvGrid(np.array([[0.0, 0.2], [0.4, 0.6]]), 2.0, 2.0)
    # centres at (+-0.5, +-0.5)
    assert epv_lookup(grid, (-0.5, -0.5)) == 0.0
    assert epv_lookup(grid, (0.5, 0.5)) == pytest.approx(0.6)
    assert epv_lookup(grid, (0.0, 0.0)) == pytest.approx(0.3)
    assert epv_lookup(grid, (9.0, -9.0)) == pytest.approx(0.4)  # clipped


def test_grid_validation():
    with pytest.raises(ValueError):
        EpvGrid(np.array([[0.0, 1.5]]))
    with pytest.raises(ValueError):
        EpvGrid(np.zeros(3))
    with pytest.warns(UserWarning):
        EpvGrid(np.array([[0.5], [0.1]]))


def test_default_grid_bounds_and_monotone():
    g = default_epv_grid()
    assert g.values.min() == 0.0 and g.values.max() == pytest.approx(0.35)
    assert np.all(np.diff(g.values.mean(axis=1)) >= 0)


def test_grid_files_round_trip(tmp_path):
    g = default_epv_grid(n_x=12, n_y=8)
    save_epv_grid(g, tmp_path / "g.csv")
    h = load_epv_grid(tmp_path / "g.csv")
    np.testing.assert_array_equal(h.values, g.values)
    np.savetxt(tmp_path / "fot.csv", g.values.T, delimiter=",", fmt="%.17g")
    np.testing.assert_array_equal(load_fot_epv_grid(tmp_path / "fot.csv").values, g.values)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_epv_grid(tmp_path / "bad.csv")


def test_reward_examples():
    grid = default_epv_grid()
    balls = np.array([[0, 0], [20, 5], [40, 0]], float)
    assert reward_stream(3, GOAL, balls, [], grid).tolist() == [0.0, 0.0, 1.0]
    assert reward_stream(3, CONCEDED_NEXT, balls, [1], grid)[-1] == -1.0
    r = reward_stream(3, OTHER, balls, [1], grid)
    assert r[1] == epv_lookup(grid, (20, 5)) and r[2] == epv_lookup(grid, (40, 0))
    with pytest.raises(ValueError):
        reward_stream(3, None, balls, [], grid)
    with pytest.raises(ValueError):
        reward_stream(3, GOAL, balls, [3], grid)


def _sequence(rng, outcome, with_shot, team=HOME, pid=0):
    n = int(rng.integers(2, 12))
    frames = [make_frame(ball=tuple(rng.uniform([-50, -30], [50, 30])), frame_index=i) for i in range(n)]
    shots = sorted(set(rng.integers(0, n, size=int(rng.integers(1, 3))).tolist())) if with_shot else []
    return PossessionSequence(pid, team, frames, [], outcome, shots)


def test_assign_rewards_matches_rule_oracle_on_grid_of_cases():
    rng = np.random.default_rng(0)
    grid = default_epv_grid()
    cases = [(o, s) for o in (GOAL, CONCEDED_NEXT, OTHER) for s in (False, True)]
    for i in range(100):
        outcome, shot = cases[i % len(cases)]
        seq = _sequence(rng, outcome, shot)
        balls = [f.ball.position for f in seq.frames]
        got = assign_rewards(seq, grid)
        assert got.tolist() == oracle_rewards(len(seq), outcome, balls, seq.shot_steps, grid)
        # undiscounted return: terminal plus shot rewards on the other steps
        shot_sum = sum(got[k] for k in seq.shot_steps if k != len(seq) - 1)
        assert got.sum() == pytest.approx(got[-1] + shot_sum, abs=1e-15)


def test_next_possession_goal_upgrades_other_to_concession():
    rng = np.random.default_rng(1)
    seq = _sequence(rng, OTHER, False)
    theirs = _sequence(rng, GOAL, False, team=AWAY, pid=1)
    ours = _sequence(rng, GOAL, False, team=HOME, pid=1)
    assert assign_rewards(seq, default_epv_grid(), theirs)[-1] == -1.0
    assert assign_rewards(seq, default_epv_grid(), ours)[-1] != -1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-60, 60), st.floats(-40, 40))
def test_epv_lookup_within_grid_range(x, y):
    g = default_epv_grid()
    assert g.values.min() - 1e-12 <= epv_lookup(g, (x, y)) <= g.values.max() + 1e-12
