"""Midpoint interpolation and visual-angle / angular-velocity primitives.

Scalar functions take plain tuples; the ``*_many`` variants operate row-wise
on ``(n, 3)`` arrays and are what the velocity stream uses. An invalid
velocity is ``None`` in the scalar API and NaN in arrays.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DegenerateGeometryError, OrderingError
from .model import MIN_GAZE_VECTOR_MM

Vec = Sequence[float]


def midpoint_time(t1: float, t2: float) -> float:
    if not t1 < t2:
        raise OrderingError(f"expected t1 < t2, got {t1} and {t2}")
    return (t1 + t2) / 2


def mean_position(p1: Vec, p2: Vec) -> tuple[float, ...]:
    return tuple((a + b) / 2 for a, b in zip(p1, p2))


def visual_angle(eye: Vec, g1: Vec, g2: Vec) -> float:
    """Angle in degrees subtended at ``eye`` by gaze points ``g1`` and ``g2``."""
    ex, ey, ez = eye
    ux, uy, uz = g1[0] - ex, g1[1] - ey, g1[2] - ez
    vx, vy, vz = g2[0] - ex, g2[1] - ey, g2[2] - ez
    uu = ux * ux + uy * uy + uz * uz
    vv = vx * vx + vy * vy + vz * vz
    if math.sqrt(uu) < MIN_GAZE_VECTOR_MM or math.sqrt(vv) < MIN_GAZE_VECTOR_MM:
        raise DegenerateGeometryError("zero-length gaze vector")
    cos = (ux * vx + uy * vy + uz * vz) / math.sqrt(uu * vv)
    return math.degrees(math.acos(min(1.0, max(-1.0, cos))))


def angular_velocity(angle_deg: float, dt_ms: float) -> float:
    """Degrees per second for an angle covered in ``dt_ms`` milliseconds."""
    if not dt_ms > 0:
        raise OrderingError(f"time difference must be positive, got {dt_ms} ms")
    return angle_deg / (dt_ms / 1000.0)


def binocular_velocity(v_left: float | None, v_right: float | None) -> float | None:
    """Mean of both eyes; the other eye when one is missing; ``None`` if neither."""
    if v_left is None:
        return v_right
    if v_right is None:
        return v_left
    return (v_left + v_right) / 2


# --------------------------------------------------------------------------- vectorized


def visual_angle_many(eye: np.ndarray, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    """Row-wise :func:`visual_angle`; NaN rows in, or degenerate vectors, give NaN."""
    u = g1 - eye
    v = g2 - eye
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = uv / np.sqrt(uu * vv)
        angle = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    degenerate = (np.sqrt(uu) < MIN_GAZE_VECTOR_MM) | (np.sqrt(vv) < MIN_GAZE_VECTOR_MM)
    angle[degenerate] = np.nan
    return angle


def binocular_velocity_many(v_left: np.ndarray, v_right: np.ndarray) -> np.ndarray:
    both = (v_left + v_right) / 2
    return np.where(np.isnan(v_left), v_right, np.where(np.isnan(v_right), v_left, both))
