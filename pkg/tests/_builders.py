"""Small constructors for hand-built recordings and midpoint streams."""

from __future__ import annotations

import math

import numpy as np

from gazeivt.ivt import LabeledStream, MidpointSample, MidpointStream, SampleLabel
from gazeivt.model import Recording

LEFT_EYE = (-32.5, 0.0, 0.0)
RIGHT_EYE = (32.5, 0.0, 0.0)
F, S, I = SampleLabel.FIXATION, SampleLabel.SACCADE, SampleLabel.INVALID


def gaze_at(azimuth_deg, elevation_deg=0.0, eye=(0.0, 0.0, 0.0), distance=600.0):
    az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
    return (
        eye[0] + distance * math.cos(el) * math.sin(az),
        eye[1] + distance * math.sin(el),
        eye[2] + distance * math.cos(el) * math.cos(az),
    )


def recording(times, left_gaze, right_gaze=None, left_valid=None, right_valid=None, pid="p", rate=100.0):
    n = len(times)
    right_gaze = left_gaze if right_gaze is None else right_gaze
    lv = np.ones(n, bool) if left_valid is None else np.asarray(left_valid, bool)
    rv = np.ones(n, bool) if right_valid is None else np.asarray(right_valid, bool)
    lg = np.array(left_gaze, float).reshape(n, 3)
    rg = np.array(right_gaze, float).reshape(n, 3)
    return Recording(
        pid, np.asarray(times, float),
        np.tile(LEFT_EYE, (n, 1)), lg, lv,
        np.tile(RIGHT_EYE, (n, 1)), rg, rv,
        sample_rate_hz=rate,
    )


def azimuth_recording(times, azimuths, **kw):
    """Both eyes look at points at the given azimuths (from the eye midpoint)."""
    gaze = [gaze_at(a) for a in azimuths]
    return recording(times, gaze, **kw)


def velocity_stream_of(times, velocities):
    return MidpointStream.from_samples(
        MidpointSample(t, v, (None, None), (None, None)) for t, v in zip(times, velocities)
    )


def labeled(times, labels):
    return LabeledStream(velocity_stream_of(times, [0.0] * len(times)), np.array([int(x) for x in labels]))
