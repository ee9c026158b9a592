"""Midpoint velocity stream and I-VT threshold labeling.

For each pair of consecutive raw samples a midpoint sample is built at the
mean timestamp. Each eye contributes a velocity only when it is valid at both
endpoints: the visual angle between the two gaze points, seen from the mean
eye position, divided by the elapsed time. The binocular velocity is the mean
of the contributing eyes. Samples are then labeled fixation when
``velocity <= threshold``, saccade above it, and invalid when no eye
contributed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .geometry import binocular_velocity_many, visual_angle_many
from .model import Point2, Point3, Recording

DEFAULT_THRESHOLDS = tuple(float(t) for t in range(10, 151, 10))
# Default fixation filter (30) and attention filter (100) of common vendor software.
NAMED_DEFAULT_THRESHOLDS = (30.0, 100.0)
DEFAULT_MAX_GAP_MS = 75.0
DEFAULT_MAX_ANGLE_DEG = 0.5


class SampleLabel(enum.IntEnum):
    FIXATION = 0
    SACCADE = 1
    INVALID = 2

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> SampleLabel:
        try:
            return cls[token.upper()]
        except KeyError:
            raise ValueError(f"unknown event kind {token!r}") from None


@dataclass(frozen=True)
class IvtConfig:
    velocity_threshold: float = 30.0
    merging_enabled: bool = False
    max_time_betw_fixations: float = DEFAULT_MAX_GAP_MS
    max_angle_betw_fixations: float = DEFAULT_MAX_ANGLE_DEG

    def __post_init__(self):
        for name in ("velocity_threshold", "max_time_betw_fixations", "max_angle_betw_fixations"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and np.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive number, got {value!r}")


@dataclass(frozen=True)
class MidpointSample:
    timestamp: float
    velocity: float | None
    eye3d: tuple[Point3 | None, Point3 | None]
    gaze3d: tuple[Point3 | None, Point3 | None]
    gaze2d: Point2 | None = None


def _opt(row: np.ndarray):
    return None if np.isnan(row[0]) else tuple(row.tolist())


@dataclass(frozen=True, eq=False)
class MidpointStream:
    """Column-wise sequence of :class:`MidpointSample` (``len = raw samples - 1``).

    ``velocity`` is NaN where invalid. Per-eye positions are NaN rows where
    that eye did not contribute a velocity.
    """

    timestamps: np.ndarray
    velocity: np.ndarray
    left_velocity: np.ndarray
    right_velocity: np.ndarray
    left_eye: np.ndarray
    left_gaze: np.ndarray
    right_eye: np.ndarray
    right_gaze: np.ndarray
    gaze2d: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __getitem__(self, i: int) -> MidpointSample:
        v = self.velocity[i]
        return MidpointSample(
            float(self.timestamps[i]),
            None if np.isnan(v) else float(v),
            (_opt(self.left_eye[i]), _opt(self.right_eye[i])),
            (_opt(self.left_gaze[i]), _opt(self.right_gaze[i])),
            _opt(self.gaze2d[i]),
        )

    def __iter__(self) -> Iterator[MidpointSample]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_samples(cls, samples: Iterable[MidpointSample]) -> MidpointStream:
        samples = list(samples)
        n = len(samples)

        def col(get, width):
            out = np.full((n, width), np.nan)
            for i, s in enumerate(samples):
                value = get(s)
                if value is not None:
                    out[i] = value
            return out

        velocity = np.array([np.nan if s.velocity is None else s.velocity for s in samples], dtype=float)
        return cls(
            np.array([s.timestamp for s in samples], dtype=float),
            velocity,
            velocity.copy(),
            velocity.copy(),
            col(lambda s: s.eye3d[0], 3),
            col(lambda s: s.gaze3d[0], 3),
            col(lambda s: s.eye3d[1], 3),
            col(lambda s: s.gaze3d[1], 3),
            col(lambda s: s.gaze2d, 2),
        )


def velocity_stream(recording: Recording) -> MidpointStream:
    n = len(recording)
    if n < 2:
        raise InsufficientDataError(f"velocity needs at least 2 samples, recording has {n}")
    t = recording.timestamps
    dt_s = np.diff(t) / 1000.0
    per_eye = {}
    for side in ("left", "right"):
        eye = getattr(recording, f"{side}_eye")
        gaze = getattr(recording, f"{side}_gaze")
        valid = getattr(recording, f"{side}_valid")
        both = valid[:-1] & valid[1:]
        mean_eye = (eye[:-1] + eye[1:]) / 2
        angle = visual_angle_many(mean_eye, gaze[:-1], gaze[1:])
        velocity = np.where(both, angle / dt_s, np.nan)
        contributes = ~np.isnan(velocity)
        mean_eye[~contributes] = np.nan
        mean_gaze = (gaze[:-1] + gaze[1:]) / 2
        mean_gaze[~contributes] = np.nan
        per_eye[side] = (velocity, mean_eye, mean_gaze)
    g2 = recording.gaze2d
    return MidpointStream(
        timestamps=(t[:-1] + t[1:]) / 2,
        velocity=binocular_velocity_many(per_eye["left"][0], per_eye["right"][0]),
        left_velocity=per_eye["left"][0],
        right_velocity=per_eye["right"][0],
        left_eye=per_eye["left"][1],
        left_gaze=per_eye["left"][2],
        right_eye=per_eye["right"][1],
        right_gaze=per_eye["right"][2],
        gaze2d=(g2[:-1] + g2[1:]) / 2,
    )


@dataclass(frozen=True, eq=False)
class LabeledStream:
    """A midpoint stream paired with one label per sample.

    Iterating yields ``(MidpointSample, SampleLabel)`` pairs.
    """

    stream: MidpointStream
    labels: np.ndarray
    threshold: float | None = field(default=None)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.shape != (len(self.stream),):
            raise ValueError("one label per midpoint sample required")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.stream)

    def __iter__(self):
        return ((self.stream[i], SampleLabel(int(lab))) for i, lab in enumerate(self.labels))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[MidpointSample, SampleLabel]]) -> LabeledStream:
        pairs = list(pairs)
        return cls(
            MidpointStream.from_samples(s for s, _ in pairs),
            np.array([int(lab) for _, lab in pairs], dtype=np.int8),
        )


def label_velocities(velocity: np.ndarray, threshold: float) -> np.ndarray:
    if not (np.isfinite(threshold) and threshold > 0):
        raise ConfigError(f"velocity threshold must be positive, got {threshold!r}")
    labels = np.where(velocity <= threshold, SampleLabel.FIXATION, SampleLabel.SACCADE).astype(np.int8)
    labels[np.isnan(velocity)] = SampleLabel.INVALID
    return labels


def label_stream(stream: MidpointStream, threshold: float) -> LabeledStream:
    return LabeledStream(stream, label_velocities(stream.velocity, threshold), float(threshold))
