import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import box
from shapely.ops import unary_union

from cipher.geometry import (
    Configuration,
    Environment,
    RobotModel,
    angle_diff,
    disc_free,
    segment_free,
    union_area,
    wrap_angle,
)

ENV = Environment((0.0, 0.0, 10.0, 10.0), ((4.0, 4.0, 6.0, 6.0), (1.0, 7.0, 2.0, 9.0)), "two")

coord = st.floats(0.0, 10.0, allow_nan=False)
rect = st.tuples(coord, coord, st.floats(0.05, 4.0), st.floats(0.05, 4.0)).map(
    lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3])
)


@given(st.floats(-100.0, 100.0, allow_nan=False))
def test_wrap_angle_range_and_equivalence(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(theta), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(theta), abs_tol=1e-9)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_angle_diff_symmetric_bounded(a, b):
    d = angle_diff(a, b)
    assert 0.0 <= d <= math.pi + 1e-12
    assert math.isclose(d, angle_diff(b, a), abs_tol=1e-12)


@given(st.lists(rect, max_size=7))
def test_union_area_matches_shapely(rects):
    expected = unary_union([box(*r) for r in rects]).area if rects else 0.0
    assert math.isclose(union_area(rects), expected, rel_tol=1e-9, abs_tol=1e-9)


def test_environment_validation():
    with pytest.raises(ValueError):
        Environment((0, 0, 0, 1))
    with pytest.raises(ValueError):
        Environment((0, 0, 1, 1), ((2, 2, 3, 3),))
    with pytest.raises(ValueError):
        Environment((0, 0, 1, 1), ((0.5, 0.5, 0.5, 0.9),))


def test_environment_round_trip(tmp_path):
    ENV.save(tmp_path / "e.json")
    assert Environment.load(tmp_path / "e.json") == ENV
    assert Environment.from_dict(ENV.to_dict()) == ENV


def test_robot_model_validation():
    with pytest.raises(ValueError):
        RobotModel(0.0)
    with pytest.raises(ValueError):
        RobotModel(0.5, "car")
    assert RobotModel(0.5).speed == 1.0
    assert RobotModel(0.5, "unicycle", v_max=2.0).speed == 2.0
    assert RobotModel.from_dict(RobotModel(0.3, "unicycle").to_dict()) == RobotModel(0.3, "unicycle")


def test_configuration_wraps_heading():
    c = Configuration(1, 2, 3 * math.pi)
    assert math.isclose(c.theta, math.pi)
    assert Configuration.from_seq(c.to_list()) == c


def test_disc_free_examples():
    empty = Environment((0, 0, 10, 10))
    assert disc_free(empty, (5, 5), 1.0)
    assert not disc_free(ENV, (5, 5), 0.1)
    # 0.4 from the obstacle edge with radius 0.5
    assert not disc_free(ENV, (3.6, 5.0), 0.5)
    assert disc_free(ENV, (3.4, 5.0), 0.5)
    # contact with the boundary counts as collision
    assert not disc_free(empty, (0.5, 5.0), 0.5)


def test_segment_free_examples():
    empty = Environment((0, 0, 10, 10))
    assert segment_free(ENV, (2, 2), (2, 2), 0.5)
    assert not segment_free(ENV, (2, 5), (8, 5), 0.5)
    assert segment_free(empty, (1, 1), (9, 9), 0.5)


@given(coord, coord, st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_disc_free_monotone_in_radius(x, y, r1, r2):
    lo, hi = min(r1, r2), max(r1, r2)
    if disc_free(ENV, (x, y), hi):
        assert disc_free(ENV, (x, y), lo)


@given(coord, coord, coord, coord, st.floats(0.1, 1.0))
def test_segment_free_symmetric_and_implies_endpoints(ax, ay, bx, by, r):
    f = segment_free(ENV, (ax, ay), (bx, by), r)
    assert f == segment_free(ENV, (bx, by), (ax, ay), r)
    if f:
        assert disc_free(ENV, (ax, ay), r) and disc_free(ENV, (bx, by), r)


def test_coverage_exact():
    env = Environment((0, 0, 10, 10), ((0, 0, 5, 5), (2, 2, 6, 6), (8, 8, 12, 12)))
    # clipped union: 25 + 16 - 9 + 4
    assert math.isclose(env.coverage(), 36 / 100)
    assert np.allclose(env.bounds_array, [0, 0, 10, 10])
