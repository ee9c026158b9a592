import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gazeivt.errors import DegenerateGeometryError, OrderingError
from gazeivt.geometry import (
    angular_velocity,
    binocular_velocity,
    binocular_velocity_many,
    mean_position,
    midpoint_time,
    visual_angle,
    visual_angle_many,
)


def test_midpoint_time():
    assert midpoint_time(0, 10) == 5
    assert midpoint_time(100, 110.4) == pytest.approx(105.2)
    with pytest.raises(OrderingError):
        midpoint_time(10, 10)


def test_mean_position():
    assert mean_position((0, 0, 0), (2, 4, 6)) == (1, 2, 3)
    assert mean_position((1.5, -2, 7), (1.5, -2, 7)) == (1.5, -2, 7)
    assert mean_position((-1, 0, 0), (1, 0, 0)) == (0, 0, 0)


def test_visual_angle_examples():
    assert visual_angle((0, 0, 0), (0, 0, 600), (0, 600 * math.tan(math.radians(1)), 600)) == pytest.approx(1.0)
    assert visual_angle((0, 0, 0), (3, 4, 600), (3, 4, 600)) == 0.0
    assert visual_angle((0, 0, 0), (0, 0, 1), (0, 1, 0)) == pytest.approx(90.0)
    assert visual_angle((0, 0, 0), (0, 0, 1), (0, 0, -1)) == pytest.approx(180.0)


def test_visual_angle_degenerate():
    with pytest.raises(DegenerateGeometryError):
        visual_angle((0, 0, 0), (0, 0, 0), (0, 0, 1))


def test_velocity_examples():
    assert angular_velocity(0.5, 10) == pytest.approx(50)
    assert angular_velocity(0.0, 3.7) == 0.0
    assert angular_velocity(1.0, 10) == pytest.approx(100)
    with pytest.raises(OrderingError):
        angular_velocity(1.0, 0)


def test_binocular_examples():
    assert binocular_velocity(40, 60) == 50
    assert binocular_velocity(None, 60) == 60
    assert binocular_velocity(60, None) == 60
    assert binocular_velocity(None, None) is None
    got = binocular_velocity_many(np.array([40, np.nan, np.nan]), np.array([60, 60, np.nan]))
    assert got[0] == 50 and got[1] == 60 and math.isnan(got[2])


vec = st.tuples(*[st.floats(-500, 500, allow_nan=False)] * 3)


def _far(eye, g):
    return math.dist(eye, g) > 1.0


@given(vec, vec, vec)
def test_angle_symmetric_and_bounded(e, g1, g2):
    assume(_far(e, g1) and _far(e, g2))
    a = visual_angle(e, g1, g2)
    assert 0.0 <= a <= 180.0
    assert a == pytest.approx(visual_angle(e, g2, g1), abs=1e-9)
    assert visual_angle(e, g1, g1) == 0.0


@given(vec, vec, vec, vec)
def test_angle_translation_invariant(e, g1, g2, shift):
    assume(_far(e, g1) and _far(e, g2))
    moved = [tuple(a + b for a, b in zip(p, shift)) for p in (e, g1, g2)]
    assert visual_angle(*moved) == pytest.approx(visual_angle(e, g1, g2), abs=1e-5)


def _rotation(ax, ay, az):
    cx, sx, cy, sy, cz, sz = math.cos(ax), math.sin(ax), math.cos(ay), math.sin(ay), math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


angle_st = st.floats(-math.pi, math.pi)


@given(vec, vec, vec, angle_st, angle_st, angle_st)
def test_angle_rotation_invariant(e, g1, g2, ax, ay, az):
    assume(_far(e, g1) and _far(e, g2))
    r = _rotation(ax, ay, az)
    eye = np.array(e)
    rot = [tuple(eye + r @ (np.array(g) - eye)) for g in (g1, g2)]
    assert visual_angle(e, *rot) == pytest.approx(visual_angle(e, g1, g2), abs=1e-5)


@given(st.one_of(st.none(), st.floats(0, 1e4)), st.one_of(st.none(), st.floats(0, 1e4)))
def test_binocular_commutative(a, b):
    assert binocular_velocity(a, b) == binocular_velocity(b, a)


@given(st.floats(0, 180), st.floats(0.01, 1000))
def test_velocity_linear_in_dt(angle, dt):
    assert angular_velocity(angle, dt / 2) == pytest.approx(2 * angular_velocity(angle, dt))


@given(st.lists(st.tuples(vec, vec, vec), min_size=1, max_size=20))
@settings(max_examples=50)
def test_vectorized_angle_matches_scalar(rows):
    e, g1, g2 = (np.array([r[i] for r in rows], float) for i in range(3))
    got = visual_angle_many(e, g1, g2)
    for k, (a, b, c) in enumerate(rows):
        try:
            expected = visual_angle(a, b, c)
        except DegenerateGeometryError:
            assert math.isnan(got[k])
            continue
        assert got[k] == pytest.approx(expected, abs=1e-9)
