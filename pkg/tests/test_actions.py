import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pitchrl.actions import (
    ACTION_INDEX,
    ACTIONS,
    N_ACTIONS,
    OFF_BALL_MASK,
    ON_BALL_MASK,
    STAY,
    action_mask,
    direction_class,
    map_provider_action,
    mask_from_str,
    mask_to_str,
)


def test_action_set_is_sixteen_with_disjoint_masks():
    assert N_ACTIONS == 16 and len(set(ACTIONS)) == 16
    assert ON_BALL_MASK.sum() == 7 and OFF_BALL_MASK.sum() == 9
    assert not np.any(ON_BALL_MASK & OFF_BALL_MASK)
    assert np.all(ON_BALL_MASK | OFF_BALL_MASK)


def test_action_mask_returns_a_copy():
    m = action_mask(True)
    m[:] = False
    assert ON_BALL_MASK.sum() == 7


@pytest.mark.parametrize("raw,expected", [
    ("Pass", "pass"), ("long-pass", "pass"), ("Through Ball", "through_pass"), ("goal", "shot"),
    ("carry", "dribble"), ("tackle", "defensive_action"), ("cross", "cross"),
])
def test_provider_mapping(raw, expected):
    assert map_provider_action(raw) == expected


def test_unknown_provider_action_raises():
    with pytest.raises(ValueError):
        map_provider_action("substitution")


@pytest.mark.parametrize("vx,vy,name", [
    (0.0, 0.0, "stay"), (0.3, 0.3, "stay"), (3, 0, "move_0"), (2, 2, "move_45"), (0, 3, "move_90"),
    (-3, 0, "move_180"), (0, -3, "move_270"), (2, -2, "move_315"), (3, 1.2, "move_0"),
])
def test_direction_class_examples(vx, vy, name):
    assert direction_class(vx, vy) == ACTION_INDEX[name]


@given(st.floats(0.5, 10), st.floats(-math.pi, math.pi))
def test_direction_class_picks_nearest_sector(speed, angle):
    k = direction_class(speed * math.cos(angle), speed * math.sin(angle))
    assert k != STAY and OFF_BALL_MASK[k]
    centre = math.radians(int(ACTIONS[k].split("_")[1]))
    gap = abs((angle - centre + math.pi) % (2 * math.pi) - math.pi)
    assert gap <= math.pi / 8 + 1e-9


@given(st.lists(st.booleans(), min_size=16, max_size=16))
def test_mask_string_round_trip(bits):
    m = np.array(bits)
    np.testing.assert_array_equal(mask_from_str(mask_to_str(m)), m)


@pytest.mark.parametrize("text", ["", "01", "2" * 16, "1" * 17])
def test_malformed_mask_string(text):
    with pytest.raises(ValueError):
        mask_from_str(text)
