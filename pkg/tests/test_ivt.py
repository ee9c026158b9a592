import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazeivt.errors import ConfigError, InsufficientDataError
from gazeivt.ivt import (
    DEFAULT_THRESHOLDS,
    IvtConfig,
    SampleLabel,
    label_stream,
    label_velocities,
    velocity_stream,
)
from gazeivt.model import Recording

from _builders import F, I, S, azimuth_recording, gaze_at, recording, velocity_stream_of


def test_defaults():
    cfg = IvtConfig()
    assert (cfg.velocity_threshold, cfg.merging_enabled) == (30.0, False)
    assert (cfg.max_time_betw_fixations, cfg.max_angle_betw_fixations) == (75, 0.5)
    assert DEFAULT_THRESHOLDS == tuple(float(t) for t in range(10, 151, 10))


@pytest.mark.parametrize("kw", [{"velocity_threshold": 0}, {"velocity_threshold": -5},
                                {"max_time_betw_fixations": 0}, {"max_angle_betw_fixations": -1}])
def test_config_rejects_non_positive(kw):
    with pytest.raises(ConfigError):
        IvtConfig(**kw)


def test_three_samples_give_two_midpoints():
    s = velocity_stream(azimuth_recording([0, 10, 20], [0, 0, 0]))
    assert len(s) == 2
    assert s.timestamps.tolist() == [5.0, 15.0]


def test_stationary_gaze_has_zero_velocity():
    s = velocity_stream(azimuth_recording(np.arange(20) * 10.0, np.full(20, 3.0)))
    assert np.all(s.velocity == 0.0)


def test_known_velocity_single_eye():
    # right eye only, 1 deg step over 10 ms as seen from that eye
    eye = (32.5, 0.0, 0.0)
    gaze = [gaze_at(0, eye=eye), gaze_at(1, eye=eye)]
    rec = recording([0, 10], gaze, left_valid=[False, False])
    s = velocity_stream(rec)
    assert s.velocity[0] == pytest.approx(100.0)
    assert math.isnan(s.left_velocity[0])
    assert np.all(np.isnan(s.left_eye[0])) and not np.any(np.isnan(s.right_eye[0]))


def test_eye_valid_at_one_endpoint_does_not_contribute():
    rec = azimuth_recording([0, 10, 20], [0, 1, 2], left_valid=[True, False, True])
    s = velocity_stream(rec)
    assert np.all(np.isnan(s.left_velocity))
    assert np.all(s.velocity == s.right_velocity)


def test_both_invalid_gives_invalid():
    rec = azimuth_recording([0, 10, 20], [0, 0, 0], left_valid=[1, 0, 1], right_valid=[1, 0, 1])
    s = velocity_stream(rec)
    assert np.all(np.isnan(s.velocity))
    assert s[0].velocity is None
    labels = label_stream(s, 30).labels
    assert labels.tolist() == [I, I]


def test_single_sample_is_insufficient():
    with pytest.raises(InsufficientDataError):
        velocity_stream(azimuth_recording([0], [0]))


def test_threshold_is_inclusive():
    labels = label_velocities(np.array([30.0, 30.01, np.nan]), 30)
    assert labels.tolist() == [F, S, I]


def test_token_round_trip():
    for lab in SampleLabel:
        assert SampleLabel.from_token(lab.token) is lab


def test_label_threshold_validation():
    with pytest.raises(ConfigError):
        label_velocities(np.zeros(3), 0.0)


velocities = st.lists(st.one_of(st.floats(0, 500), st.just(math.nan)), min_size=1, max_size=60)


@given(velocities, st.floats(1, 200), st.floats(1, 200))
def test_label_monotone(vs, t1, t2):
    lo, hi = sorted((t1, t2))
    v = np.array(vs)
    a, b = label_velocities(v, lo), label_velocities(v, hi)
    assert np.all((a != F) | (b == F))
    assert np.array_equal(a == I, b == I)


@given(st.integers(1, 50), st.floats(0.001, 1e6))
def test_zero_velocities_all_fixation(n, threshold):
    s = velocity_stream_of(np.arange(n) * 10.0, [0.0] * n)
    assert np.all(label_stream(s, threshold).labels == F)


@st.composite
def random_recordings(draw):
    n = draw(st.integers(2, 30))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    t = np.cumsum(rng.uniform(5, 15, n))
    lg = rng.normal(0, 50, (n, 3)) + [0, 0, 600]
    rg = rng.normal(0, 50, (n, 3)) + [0, 0, 600]
    return recording(t, lg, rg, left_valid=rng.random(n) > 0.2, right_valid=rng.random(n) > 0.2)


def _swap(rec: Recording) -> Recording:
    return Recording(
        rec.participant_id, rec.timestamps,
        rec.right_eye, rec.right_gaze, rec.right_valid,
        rec.left_eye, rec.left_gaze, rec.left_valid,
        rec.gaze2d, sample_rate_hz=rec.sample_rate_hz,
    )


@given(random_recordings())
@settings(max_examples=50, deadline=None)
def test_channel_swap_keeps_velocities(rec):
    a, b = velocity_stream(rec), velocity_stream(_swap(rec))
    np.testing.assert_allclose(a.velocity, b.velocity, rtol=1e-12, atol=0)
    assert np.array_equal(np.isnan(a.velocity), np.isnan(b.velocity))


@given(random_recordings())
@settings(max_examples=30, deadline=None)
def test_velocity_stream_deterministic(rec):
    a, b = velocity_stream(rec), velocity_stream(rec)
    assert a.velocity.tobytes() == b.velocity.tobytes()
    t = rec.timestamps
    assert np.all((a.timestamps > t[:-1]) & (a.timestamps < t[1:]))
    assert np.all(np.isnan(a.velocity) | (a.velocity >= 0))
