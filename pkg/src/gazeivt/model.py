"""Raw gaze recordings: domain types, Gaze-TSV ingestion, windowing, validation.

A :class:`Recording` stores its samples column-wise in read-only numpy arrays
so the velocity pipeline can run vectorized over long (20+ minute) recordings.
Positions of an invalid eye are stored as NaN and never read by consumers.

Coordinates are millimeters in the scene-camera frame of the tracker. Only
relative geometry is used downstream, so the origin of that frame is
irrelevant.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, FormatError, InsufficientDataError, OrderingError

# Gaze vectors shorter than this (mm) are degenerate.
MIN_GAZE_VECTOR_MM = 1e-6

DEFAULT_SAMPLE_RATE_HZ = 100.0

TSV_COLUMNS = (
    "timestamp_ms",
    "left_eye_x_mm", "left_eye_y_mm", "left_eye_z_mm",
    "left_gaze_x_mm", "left_gaze_y_mm", "left_gaze_z_mm",
    "right_eye_x_mm", "right_eye_y_mm", "right_eye_z_mm",
    "right_gaze_x_mm", "right_gaze_y_mm", "right_gaze_z_mm",
    "gaze2d_x", "gaze2d_y",
)

Point3 = tuple[float, float, float]
Point2 = tuple[float, float]


@dataclass(frozen=True)
class EyeSample:
    """One eye at one timestamp. Positions are ``None`` when ``valid`` is False."""

    eye_position: Point3 | None
    gaze_position: Point3 | None
    valid: bool = True

    def __post_init__(self):
        if not self.valid:
            object.__setattr__(self, "eye_position", None)
            object.__setattr__(self, "gaze_position", None)
            return
        if self.eye_position is None or self.gaze_position is None:
            raise ValueError("a valid eye sample needs both eye and gaze positions")
        eye = tuple(float(v) for v in self.eye_position)
        gaze = tuple(float(v) for v in self.gaze_position)
        if len(eye) != 3 or len(gaze) != 3:
            raise ValueError("eye and gaze positions must be 3D points")
        if not all(math.isfinite(v) for v in eye + gaze):
            raise ValueError("eye and gaze coordinates must be finite")
        if math.dist(eye, gaze) < MIN_GAZE_VECTOR_MM:
            raise ValueError("gaze position coincides with eye position")
        object.__setattr__(self, "eye_position", eye)
        object.__setattr__(self, "gaze_position", gaze)

    @classmethod
    def invalid(cls) -> EyeSample:
        return cls(None, None, valid=False)


@dataclass(frozen=True)
class GazeSample:
    timestamp: float
    left: EyeSample
    right: EyeSample
    gaze2d: Point2 | None = None

    def __post_init__(self):
        if not (math.isfinite(self.timestamp) and self.timestamp >= 0):
            raise ValueError(f"timestamp must be finite and >= 0, got {self.timestamp}")
        if self.gaze2d is not None:
            g = tuple(float(v) for v in self.gaze2d)
            if len(g) != 2 or not all(math.isfinite(v) for v in g):
                raise ValueError("gaze2d must be a finite 2D point")
            object.__setattr__(self, "gaze2d", g)


@dataclass(frozen=True, eq=False)
class Recording:
    """Time-ordered gaze samples of one participant.

    Column arrays (``n`` = number of samples): ``timestamps`` (n,),
    ``left_eye``/``left_gaze``/``right_eye``/``right_gaze`` (n, 3),
    ``left_valid``/``right_valid`` (n,) bool, ``gaze2d`` (n, 2) with NaN rows
    where absent. An eye whose gaze vector is degenerate is stored as invalid.
    """

    participant_id: str
    timestamps: np.ndarray
    left_eye: np.ndarray
    left_gaze: np.ndarray
    left_valid: np.ndarray
    right_eye: np.ndarray
    right_gaze: np.ndarray
    right_valid: np.ndarray
    gaze2d: np.ndarray | None = None
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float, copy=True).reshape(-1)
        n = t.size
        if not np.all(np.isfinite(t)) or (n and t.min() < 0):
            raise ValueError("timestamps must be finite and >= 0")
        bad = np.flatnonzero(np.diff(t) <= 0)
        if bad.size:
            i = int(bad[0]) + 1
            raise OrderingError(f"timestamp {t[i]!r} at sample {i} does not exceed {t[i - 1]!r}")
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ConfigError("sample_rate_hz must be positive")
        t.flags.writeable = False
        object.__setattr__(self, "timestamps", t)
        for side in ("left", "right"):
            eye = np.array(getattr(self, f"{side}_eye"), dtype=float, copy=True).reshape(n, 3)
            gaze = np.array(getattr(self, f"{side}_gaze"), dtype=float, copy=True).reshape(n, 3)
            valid = np.array(getattr(self, f"{side}_valid"), dtype=bool, copy=True).reshape(n)
            finite = np.isfinite(eye).all(axis=1) & np.isfinite(gaze).all(axis=1)
            if np.any(valid & ~finite):
                raise ValueError(f"{side} eye marked valid with non-finite coordinates")
            with np.errstate(invalid="ignore"):
                length = np.linalg.norm(gaze - eye, axis=1)
            valid &= finite & (length >= MIN_GAZE_VECTOR_MM)
            eye[~valid] = np.nan
            gaze[~valid] = np.nan
            for name, arr in ((f"{side}_eye", eye), (f"{side}_gaze", gaze), (f"{side}_valid", valid)):
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)
        if self.gaze2d is None:
            g2 = np.full((n, 2), np.nan)
        else:
            g2 = np.array(self.gaze2d, dtype=float, copy=True).reshape(n, 2)
            g2[~np.isfinite(g2).all(axis=1)] = np.nan
        g2.flags.writeable = False
        object.__setattr__(self, "gaze2d", g2)

    @classmethod
    def from_samples(
        cls,
        participant_id: str,
        samples: Iterable[GazeSample],
        sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    ) -> Recording:
        samples = list(samples)
        n = len(samples)
        cols = {k: np.full((n, 3), np.nan) for k in ("le", "lg", "re", "rg")}
        lv = np.zeros(n, bool)
        rv = np.zeros(n, bool)
        g2 = np.full((n, 2), np.nan)
        for i, s in enumerate(samples):
            if s.left.valid:
                cols["le"][i], cols["lg"][i], lv[i] = s.left.eye_position, s.left.gaze_position, True
            if s.right.valid:
                cols["re"][i], cols["rg"][i], rv[i] = s.right.eye_position, s.right.gaze_position, True
            if s.gaze2d is not None:
                g2[i] = s.gaze2d
        return cls(
            participant_id,
            np.array([s.timestamp for s in samples], dtype=float),
            cols["le"], cols["lg"], lv, cols["re"], cols["rg"], rv, g2,
            sample_rate_hz=sample_rate_hz,
        )

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __getitem__(self, i: int) -> GazeSample:
        def eye(side):
            if not getattr(self, f"{side}_valid")[i]:
                return EyeSample.invalid()
            return EyeSample(
                tuple(getattr(self, f"{side}_eye")[i].tolist()),
                tuple(getattr(self, f"{side}_gaze")[i].tolist()),
            )

        g2 = self.gaze2d[i]
        return GazeSample(
            float(self.timestamps[i]),
            eye("left"),
            eye("right"),
            None if np.isnan(g2[0]) else (float(g2[0]), float(g2[1])),
        )

    @property
    def samples(self) -> tuple[GazeSample, ...]:
        return tuple(self[i] for i in range(len(self)))

    @property
    def duration_ms(self) -> float:
        """Time between first and last sample (0 for fewer than 2 samples)."""
        if len(self) < 2:
            return 0.0
        return float(self.timestamps[-1] - self.timestamps[0])

    def slice(self, start: int, stop: int) -> Recording:
        return Recording(
            self.participant_id,
            self.timestamps[start:stop],
            self.left_eye[start:stop], self.left_gaze[start:stop], self.left_valid[start:stop],
            self.right_eye[start:stop], self.right_gaze[start:stop], self.right_valid[start:stop],
            self.gaze2d[start:stop],
            sample_rate_hz=self.sample_rate_hz,
        )

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        if (self.participant_id, self.sample_rate_hz) != (other.participant_id, other.sample_rate_hz):
            return False
        names = ("timestamps", "left_eye", "left_gaze", "left_valid",
                 "right_eye", "right_gaze", "right_valid", "gaze2d")
        return all(
            np.array_equal(getattr(self, k), getattr(other, k), equal_nan=k not in ("left_valid", "right_valid"))
            for k in names
        )

    __hash__ = None


@dataclass(frozen=True)
class GroupAssignment:
    participant_id: str
    group_label: str


# --------------------------------------------------------------------------- parsing


def _num(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"column {column}: expected a number, got {text!r}", line) from None
    if not math.isfinite(value):
        raise FormatError(f"column {column}: non-finite value {text!r}", line)
    return value


def parse_recording(
    text: str,
    participant_id: str,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
) -> Recording:
    """Parse Gaze-TSV text into a :class:`Recording`.

    An empty cell in any of an eye's six position columns marks that eye
    invalid for the row; a gaze point coinciding with the eye position is
    treated the same way. The two ``gaze2d`` cells are optional. Blank lines
    are skipped.
    """
    lines = text.splitlines()
    if not lines or lines[0].lstrip("﻿").rstrip("\r").split("\t") != list(TSV_COLUMNS):
        raise FormatError("header must be: " + "\t".join(TSV_COLUMNS), 1)
    ncol = len(TSV_COLUMNS)
    ts: list[float] = []
    pos = {k: [] for k in ("le", "lg", "re", "rg")}
    lv: list[bool] = []
    rv: list[bool] = []
    g2: list[tuple[float, float]] = []
    nan3 = (math.nan, math.nan, math.nan)

    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = raw.rstrip("\r").split("\t")
        if len(cells) != ncol:
            raise FormatError(f"expected {ncol} tab-separated fields, got {len(cells)}", lineno)
        t = _num(cells[0], lineno, TSV_COLUMNS[0])
        if t < 0:
            raise FormatError(f"negative timestamp {t!r}", lineno)
        if ts and t <= ts[-1]:
            raise OrderingError(f"timestamp {t!r} does not exceed previous {ts[-1]!r}", lineno)
        ts.append(t)
        for base, ek, gk, vlist in ((1, "le", "lg", lv), (7, "re", "rg", rv)):
            block = cells[base:base + 6]
            if any(c.strip() == "" for c in block):
                pos[ek].append(nan3)
                pos[gk].append(nan3)
                vlist.append(False)
                continue
            vals = [_num(c, lineno, TSV_COLUMNS[base + j]) for j, c in enumerate(block)]
            eye, gaze = tuple(vals[:3]), tuple(vals[3:])
            ok = math.dist(eye, gaze) >= MIN_GAZE_VECTOR_MM
            pos[ek].append(eye if ok else nan3)
            pos[gk].append(gaze if ok else nan3)
            vlist.append(ok)
        gx, gy = cells[13], cells[14]
        if gx.strip() == "" or gy.strip() == "":
            g2.append((math.nan, math.nan))
        else:
            g2.append((_num(gx, lineno, TSV_COLUMNS[13]), _num(gy, lineno, TSV_COLUMNS[14])))

    n = len(ts)
    return Recording(
        participant_id,
        np.array(ts, dtype=float),
        np.array(pos["le"], dtype=float).reshape(n, 3),
        np.array(pos["lg"], dtype=float).reshape(n, 3),
        np.array(lv, dtype=bool),
        np.array(pos["re"], dtype=float).reshape(n, 3),
        np.array(pos["rg"], dtype=float).reshape(n, 3),
        np.array(rv, dtype=bool),
        np.array(g2, dtype=float).reshape(n, 2),
        sample_rate_hz=sample_rate_hz,
    )


def serialize_recording(recording: Recording) -> str:
    """Write a recording as Gaze-TSV; ``parse_recording`` reads it back exactly."""
    out = ["\t".join(TSV_COLUMNS)]
    t = recording.timestamps.tolist()
    blocks = []
    for side in ("left", "right"):
        valid = getattr(recording, f"{side}_valid").tolist()
        eye = getattr(recording, f"{side}_eye").tolist()
        gaze = getattr(recording, f"{side}_gaze").tolist()
        blocks.append((valid, eye, gaze))
    g2 = recording.gaze2d.tolist()
    for i in range(len(t)):
        row = [repr(t[i])]
        for valid, eye, gaze in blocks:
            if valid[i]:
                row.extend(repr(v) for v in eye[i] + gaze[i])
            else:
                row.extend([""] * 6)
        if math.isnan(g2[i][0]):
            row.extend(["", ""])
        else:
            row.extend(repr(v) for v in g2[i])
        out.append("\t".join(row))
    return "\n".join(out) + "\n"


def parse_group_assignments(text: str) -> list[GroupAssignment]:
    """Read a ``participant_id,group_label`` CSV (header required)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["participant_id", "group_label"]:
        raise FormatError("header must be: participant_id,group_label", 1)
    seen: set[str] = set()
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2 or not row[0].strip() or not row[1].strip():
            raise FormatError("expected participant_id,group_label", lineno)
        pid, label = row[0].strip(), row[1].strip()
        if pid in seen:
            raise FormatError(f"duplicate participant_id {pid!r}", lineno)
        seen.add(pid)
        out.append(GroupAssignment(pid, label))
    return out


# --------------------------------------------------------------------------- windowing / validation


def window(recording: Recording, start_ms: float, duration_ms: float) -> Recording:
    """Samples with ``start_ms <= timestamp < start_ms + duration_ms``."""
    if not duration_ms > 0:
        raise ConfigError(f"window duration must be positive, got {duration_ms}")
    t = recording.timestamps
    lo = int(np.searchsorted(t, start_ms, side="left"))
    hi = int(np.searchsorted(t, start_ms + duration_ms, side="left"))
    if hi - lo < 2:
        raise InsufficientDataError(
            f"window [{start_ms}, {start_ms + duration_ms}) ms holds {hi - lo} sample(s); need at least 2"
        )
    if lo == 0 and hi == len(recording):
        return recording
    return recording.slice(lo, hi)


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    value: float


def validate(recording: Recording, rate_tolerance: float = 0.05) -> list[Issue]:
    """Diagnostics for a recording; never modifies it.

    Reports the fraction of samples with both eyes invalid, the longest run of
    such samples, and a mismatch between the median inter-sample interval and
    the nominal rate (relative deviation above ``rate_tolerance``).
    """
    issues: list[Issue] = []
    n = len(recording)
    if n == 0:
        return [Issue("empty", "recording has no samples", 0.0)]
    both_invalid = ~(recording.left_valid | recording.right_valid)
    count = int(both_invalid.sum())
    if count:
        frac = count / n
        issues.append(Issue("invalid_fraction", f"invalid fraction {frac:.2f}", frac))
        padded = np.concatenate(([0], both_invalid.astype(np.int8), [0]))
        edges = np.flatnonzero(np.diff(padded))
        longest = int((edges[1::2] - edges[0::2]).max())
        issues.append(Issue("longest_invalid_run", f"longest invalid run {longest} samples", float(longest)))
    if n >= 2:
        median_dt = float(np.median(np.diff(recording.timestamps)))
        nominal_dt = 1000.0 / recording.sample_rate_hz
        if abs(median_dt - nominal_dt) > rate_tolerance * nominal_dt:
            effective = 1000.0 / median_dt
            issues.append(Issue(
                "rate_mismatch",
                f"effective rate {effective:.2f} Hz differs from nominal {recording.sample_rate_hz:g} Hz",
                effective,
            ))
    return issues


def assignments_by_participant(assignments: Sequence[GroupAssignment]) -> dict[str, str]:
    out: dict[str, str] = {}
    for a in assignments:
        if a.participant_id in out:
            raise FormatError(f"duplicate participant_id {a.participant_id!r}")
        out[a.participant_id] = a.group_label
    return out
