"""Synthetic binocular gaze traces with ground-truth events, and detection scoring.

A scenario is a sequence of fixations, constant-angular-velocity saccades and
dropouts. The head is static: the eyes sit at ``(+-interocular/2, 0, 0)`` mm
and look along +z. Gaze points are generated per eye; angular noise rotates
each gaze ray about its eye by a random offset with standard deviation
``noise_deg`` on each of two orthogonal axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .events import EventGroup
from .ivt import SampleLabel
from .model import Point3, Recording

FIXATION, SACCADE, INVALID = SampleLabel.FIXATION, SampleLabel.SACCADE, SampleLabel.INVALID


@dataclass(frozen=True)
class EyeGeometry:
    interocular_mm: float = 65.0
    viewing_distance_mm: float = 600.0

    def __post_init__(self):
        if not (self.viewing_distance_mm > 0 and math.isfinite(self.viewing_distance_mm)):
            raise ConfigError("viewing distance must be positive")
        if not (self.interocular_mm >= 0 and math.isfinite(self.interocular_mm)):
            raise ConfigError("interocular distance must be non-negative")

    @property
    def eyes(self) -> tuple[np.ndarray, np.ndarray]:
        half = self.interocular_mm / 2
        return np.array([-half, 0.0, 0.0]), np.array([half, 0.0, 0.0])

    def target(self, azimuth_deg: float, elevation_deg: float = 0.0) -> Point3:
        """Point at the viewing distance in the given direction from between the eyes."""
        az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
        d = self.viewing_distance_mm
        return (d * math.cos(el) * math.sin(az), d * math.sin(el), d * math.cos(el) * math.cos(az))


@dataclass(frozen=True)
class Fixation:
    target: Point3
    duration: float


@dataclass(frozen=True)
class Saccade:
    origin: Point3
    destination: Point3
    duration: float


@dataclass(frozen=True)
class Dropout:
    duration: float
    eyes: str = "both"  # "left", "right" or "both"


ScenarioEvent = Fixation | Saccade | Dropout


@dataclass(frozen=True)
class TruthEvent:
    kind: SampleLabel
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class GroundTruth:
    events: tuple[TruthEvent, ...]


# --------------------------------------------------------------------------- scenario helpers


def _point(value) -> Point3:
    p = tuple(float(v) for v in value)
    if len(p) != 3 or not all(math.isfinite(v) for v in p):
        raise ConfigError(f"expected a finite 3D point, got {value!r}")
    return p


def _check(scenario: Sequence[ScenarioEvent]) -> None:
    if not scenario:
        raise ConfigError("scenario is empty")
    position = None
    for i, ev in enumerate(scenario):
        if not (ev.duration > 0 and math.isfinite(ev.duration)):
            raise ConfigError(f"event {i}: duration must be positive")
        if isinstance(ev, Fixation):
            start = end = ev.target
        elif isinstance(ev, Saccade):
            start, end = ev.origin, ev.destination
        elif isinstance(ev, Dropout):
            if ev.eyes not in ("left", "right", "both"):
                raise ConfigError(f"event {i}: dropout eyes must be left, right or both")
            if position is None:
                raise ConfigError(f"event {i}: a scenario cannot start with a dropout")
            continue
        else:
            raise ConfigError(f"event {i}: unknown scenario event {ev!r}")
        if position is not None and not np.allclose(start, position, rtol=0, atol=1e-9):
            raise ConfigError(f"event {i}: gaze path is discontinuous ({start} after {position})")
        position = end


def scenario_from_json(text: str, geometry: EyeGeometry | None = None) -> list[ScenarioEvent]:
    """Parse the scenario JSON array.

    Points are given either in millimeters (``target``, ``from``, ``to``) or
    as ``[azimuth, elevation]`` degrees on the viewing sphere (``target_deg``,
    ``from_deg``, ``to_deg``).
    """
    geometry = geometry or EyeGeometry()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ConfigError("scenario must be a JSON array of events")

    def pt(item, key):
        if key in item:
            return _point(item[key])
        if key + "_deg" in item:
            return geometry.target(*[float(v) for v in item[key + "_deg"]])
        raise ConfigError(f"event needs {key!r} or {key + '_deg'!r}")

    out: list[ScenarioEvent] = []
    for i, item in enumerate(data):
        try:
            kind = item["kind"]
            duration = float(item["duration_ms"])
            if kind == "fixation":
                out.append(Fixation(pt(item, "target"), duration))
            elif kind == "saccade":
                out.append(Saccade(pt(item, "from"), pt(item, "to"), duration))
            elif kind == "dropout":
                out.append(Dropout(duration, item.get("eyes", "both")))
            else:
                raise ConfigError(f"unknown kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"scenario event {i}: {exc}") from None
    _check(out)
    return out


def scenario_to_json(scenario: Iterable[ScenarioEvent]) -> str:
    items = []
    for ev in scenario:
        if isinstance(ev, Fixation):
            items.append({"kind": "fixation", "target": list(ev.target), "duration_ms": ev.duration})
        elif isinstance(ev, Saccade):
            items.append({"kind": "saccade", "from": list(ev.origin), "to": list(ev.destination),
                          "duration_ms": ev.duration})
        else:
            items.append({"kind": "dropout", "eyes": ev.eyes, "duration_ms": ev.duration})
    return json.dumps(items, indent=1) + "\n"


def alternating_scenario(
    geometry: EyeGeometry,
    fixation_ms: Sequence[float],
    saccade_deg: Sequence[float],
    saccade_ms: Sequence[float],
) -> list[ScenarioEvent]:
    """Fixations along the horizon joined by saccades of the given amplitudes.

    Amplitudes alternate in sign so the gaze stays near straight ahead.
    """
    if len(saccade_deg) != len(fixation_ms) - 1 or len(saccade_ms) != len(saccade_deg):
        raise ConfigError("need one saccade between each pair of fixations")
    az = 0.0
    out: list[ScenarioEvent] = [Fixation(geometry.target(az), fixation_ms[0])]
    for k, (amp, dur) in enumerate(zip(saccade_deg, saccade_ms)):
        nxt = az + (amp if k % 2 == 0 else -amp)
        out.append(Saccade(geometry.target(az), geometry.target(nxt), dur))
        out.append(Fixation(geometry.target(nxt), fixation_ms[k + 1]))
        az = nxt
    return out


def random_scenario(
    rng: np.random.Generator,
    total_ms: float,
    geometry: EyeGeometry | None = None,
    dropout_rate: float = 0.05,
) -> list[ScenarioEvent]:
    """A random fixation/saccade/dropout sequence of roughly ``total_ms``.

    Saccades span a wide velocity range (including slow ones between 10 and
    150 deg/s and tiny ones that merging can bridge) so threshold and merge
    behaviour is exercised.
    """
    geometry = geometry or EyeGeometry()
    az, el = 0.0, 0.0
    out: list[ScenarioEvent] = [Fixation(geometry.target(az, el), float(rng.uniform(80, 400)))]
    elapsed = out[0].duration
    while elapsed < total_ms:
        if rng.random() < dropout_rate:
            eyes = str(rng.choice(["left", "right", "both"]))
            out.append(Dropout(float(rng.integers(1, 12) * 10), eyes))
        else:
            amp = float(rng.choice([rng.uniform(0.05, 0.6), rng.uniform(0.5, 4.0), rng.uniform(3.0, 25.0)]))
            direction = rng.uniform(0, 2 * math.pi)
            naz = float(np.clip(az + amp * math.cos(direction), -30, 30))
            nel = float(np.clip(el + amp * math.sin(direction), -20, 20))
            dur = float(rng.integers(1, 10) * 10)
            out.append(Saccade(geometry.target(az, el), geometry.target(naz, nel), dur))
            az, el = naz, nel
        fix = Fixation(geometry.target(az, el), float(rng.integers(3, 50) * 10))
        out.append(fix)
        elapsed += out[-2].duration + fix.duration
    return out


# --------------------------------------------------------------------------- generation


def _slerp(u: np.ndarray, v: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Unit vectors at fractions ``f`` along the great circle from ``u`` to ``v``."""
    omega = math.acos(min(1.0, max(-1.0, float(u @ v))))
    if omega < 1e-12:
        return np.broadcast_to(u, (f.size, 3)).copy()
    s = math.sin(omega)
    return (np.sin((1 - f) * omega)[:, None] * u + np.sin(f * omega)[:, None] * v) / s


def _rotate_noise(eye: np.ndarray, gaze: np.ndarray, noise_deg: float, rng: np.random.Generator) -> np.ndarray:
    ray = gaze - eye
    length = np.linalg.norm(ray, axis=1, keepdims=True)
    d = ray / length
    helper = np.where(np.abs(d[:, [0]]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    u = np.cross(d, helper)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v = np.cross(d, u)
    offsets = np.radians(rng.normal(0.0, noise_deg, size=(d.shape[0], 2)))
    theta = np.hypot(offsets[:, 0], offsets[:, 1])[:, None]
    phi = np.arctan2(offsets[:, 1], offsets[:, 0])[:, None]
    new_d = np.cos(theta) * d + np.sin(theta) * (np.cos(phi) * u + np.sin(phi) * v)
    return eye + length * new_d


def generate_trace(
    scenario: Sequence[ScenarioEvent],
    sample_rate_hz: float = 100.0,
    geometry: EyeGeometry | None = None,
    noise_deg: float = 0.0,
    seed: int = 0,
    participant_id: str = "synthetic",
) -> tuple[Recording, GroundTruth]:
    """Sample a scenario at a uniform rate; returns the recording and its ground truth.

    Sample ``k`` is at ``k * 1000 / rate`` ms and belongs to the event whose
    half-open interval contains it. Ground-truth intervals are clipped to
    the span of the samples and adjacent events of equal kind are joined; a
    single-eye dropout counts as fixation since the other eye stays on target.
    """
    geometry = geometry or EyeGeometry()
    if not (sample_rate_hz > 0 and math.isfinite(sample_rate_hz)):
        raise ConfigError("sample rate must be positive")
    if not noise_deg >= 0:
        raise ConfigError("noise must be non-negative")
    _check(scenario)
    rng = np.random.default_rng(seed)
    dt = 1000.0 / sample_rate_hz
    starts = np.concatenate(([0.0], np.cumsum([ev.duration for ev in scenario])))
    total = float(starts[-1])
    n = int(math.floor(total / dt + 1e-9))
    if n < 1:
        raise ConfigError("scenario shorter than one sample interval")
    t = np.arange(n) * dt
    bounds = np.searchsorted(t, starts, side="left")
    eyes = geometry.eyes
    gaze = [np.empty((n, 3)), np.empty((n, 3))]
    valid = [np.ones(n, bool), np.ones(n, bool)]
    moving = np.zeros(n, bool)
    position = None
    for i, ev in enumerate(scenario):
        idx = np.arange(bounds[i], bounds[i + 1])
        if isinstance(ev, Fixation):
            position = np.asarray(ev.target, float)
            for s in (0, 1):
                gaze[s][idx] = position
        elif isinstance(ev, Saccade):
            frac = (t[idx] - starts[i]) / ev.duration
            a, b = np.asarray(ev.origin, float), np.asarray(ev.destination, float)
            for s in (0, 1):
                ra, rb = a - eyes[s], b - eyes[s]
                la, lb = np.linalg.norm(ra), np.linalg.norm(rb)
                if la < 1e-6 or lb < 1e-6:
                    raise ConfigError(f"event {i}: gaze target coincides with an eye")
                dirs = _slerp(ra / la, rb / lb, frac)
                gaze[s][idx] = eyes[s] + dirs * (la + (lb - la) * frac)[:, None]
            moving[idx] = True
            position = b
        else:
            for s in (0, 1):
                gaze[s][idx] = position
            if ev.eyes in ("left", "both"):
                valid[0][idx] = False
            if ev.eyes in ("right", "both"):
                valid[1][idx] = False
    for s in (0, 1):
        if np.any(np.linalg.norm(gaze[s] - eyes[s], axis=1) < 1e-6):
            raise ConfigError("gaze target coincides with an eye")
        if noise_deg > 0:
            gaze[s] = _rotate_noise(np.broadcast_to(eyes[s], (n, 3)), gaze[s], noise_deg, rng)
    eye_cols = [np.broadcast_to(eyes[s], (n, 3)) for s in (0, 1)]
    recording = Recording(
        participant_id, t,
        eye_cols[0], gaze[0], valid[0],
        eye_cols[1], gaze[1], valid[1],
        None, sample_rate_hz=sample_rate_hz,
    )
    return recording, _truth(scenario, starts, float(t[-1]))


def _truth(scenario, starts, span_end: float) -> GroundTruth:
    events: list[TruthEvent] = []
    for i, ev in enumerate(scenario):
        if isinstance(ev, Fixation):
            kind = FIXATION
        elif isinstance(ev, Saccade):
            kind = SACCADE
        else:
            kind = INVALID if ev.eyes == "both" else FIXATION
        lo, hi = float(starts[i]), min(float(starts[i + 1]), span_end)
        if lo >= span_end and events:
            break
        if events and events[-1].kind == kind:
            events[-1] = TruthEvent(kind, events[-1].start, hi)
        else:
            events.append(TruthEvent(kind, lo, hi))
    return GroundTruth(tuple(events))


def truth_to_json(truth: GroundTruth, timestamps: np.ndarray | None = None) -> str:
    """Ground truth in the event-list JSON layout.

    With ``timestamps`` given, ``sample_count`` is the number of raw samples
    inside each event (the last event includes its end); otherwise null.
    """
    counts = [None] * len(truth.events)
    if timestamps is not None:
        for k, e in enumerate(truth.events):
            last = k == len(truth.events) - 1
            lo = np.searchsorted(timestamps, e.start, side="left")
            hi = np.searchsorted(timestamps, e.end, side="right" if last else "left")
            counts[k] = int(hi - lo)
    return json.dumps(
        [
            {"kind": e.kind.token, "start_ms": e.start, "end_ms": e.end, "duration_ms": e.duration,
             "sample_count": n, "mean_gaze3d": None, "mean_eye3d": None}
            for e, n in zip(truth.events, counts)
        ],
        indent=1,
    ) + "\n"


def truth_from_events(groups: Iterable[EventGroup]) -> GroundTruth:
    return GroundTruth(tuple(TruthEvent(g.kind, g.start, g.end) for g in groups))


def doubled_trace(recording: Recording, bridge_samples: int = 2, bridge_elevation_deg: float = 60.0) -> Recording:
    """The recording, a fast bridge excursion, then a time-shifted copy of itself.

    Bridge samples alternate between ``+-bridge_elevation_deg`` elevation so
    every step into, within and out of the bridge is a large, fast gaze
    shift; the two copies are therefore separated by saccade samples.
    """
    if bridge_samples < 1:
        raise ConfigError("bridge needs at least one sample")
    dt = 1000.0 / recording.sample_rate_hz
    t = recording.timestamps
    bridge_t = t[-1] + dt * np.arange(1, bridge_samples + 1)
    shift = bridge_t[-1] + dt - t[0]
    signs = np.where(np.arange(bridge_samples) % 2 == 0, 1.0, -1.0)
    el = np.radians(bridge_elevation_deg) * signs
    rays = 600.0 * np.stack([np.zeros_like(el), np.sin(el), np.cos(el)], axis=1)
    cols = []
    for side in ("left", "right"):
        eye = getattr(recording, f"{side}_eye")
        gaze = getattr(recording, f"{side}_gaze")
        valid = getattr(recording, f"{side}_valid")
        e0 = np.nanmean(eye[valid], axis=0) if valid.any() else np.zeros(3)
        cols += [
            np.concatenate((eye, np.broadcast_to(e0, (bridge_samples, 3)), eye)),
            np.concatenate((gaze, e0 + rays, gaze)),
            np.concatenate((valid, np.ones(bridge_samples, bool), valid)),
        ]
    g2 = np.concatenate((recording.gaze2d, np.full((bridge_samples, 2), np.nan), recording.gaze2d))
    return Recording(
        recording.participant_id,
        np.concatenate((t, bridge_t, t + shift)),
        *cols, g2,
        sample_rate_hz=recording.sample_rate_hz,
    )


# --------------------------------------------------------------------------- scoring


@dataclass(frozen=True)
class KindScore:
    precision: float
    recall: float
    detected: int
    truth: int
    matched: int


@dataclass(frozen=True)
class DetectionScores:
    per_kind: dict[str, KindScore]
    sample_agreement: float


def score_detection(
    detected: Sequence[EventGroup | TruthEvent],
    truth: GroundTruth,
    boundary_tolerance_ms: float = 10.0,
) -> DetectionScores:
    """Event-level precision/recall per kind and time-weighted label agreement.

    A detected event matches a truth event when the kinds agree and both
    boundaries lie within the tolerance; each truth event is matched at most
    once (first unmatched candidate in temporal order). When a kind has no
    detected (truth) events its precision (recall) is 1.0. Agreement is the
    fraction of the truth span during which detected and true kinds agree.
    """
    tol = boundary_tolerance_ms + 1e-9
    det = sorted(detected, key=lambda e: (e.start, e.end))
    tru = list(truth.events)
    used = [False] * len(tru)
    matched = {k: 0 for k in SampleLabel}
    j0 = 0
    for d in det:
        while j0 < len(tru) and tru[j0].end < d.start - tol:
            j0 += 1
        j = j0
        while j < len(tru) and tru[j].start <= d.start + tol:
            e = tru[j]
            if not used[j] and e.kind == d.kind and abs(e.start - d.start) <= tol and abs(e.end - d.end) <= tol:
                used[j] = True
                matched[d.kind] += 1
                break
            j += 1
    per_kind = {}
    for k in SampleLabel:
        nd = sum(1 for d in det if d.kind == k)
        nt = sum(1 for e in tru if e.kind == k)
        per_kind[k.token] = KindScore(
            precision=matched[k] / nd if nd else 1.0,
            recall=matched[k] / nt if nt else 1.0,
            detected=nd, truth=nt, matched=matched[k],
        )

    agree = 0.0
    i = 0
    for e in tru:
        while i < len(det) and det[i].end <= e.start:
            i += 1
        j = i
        while j < len(det) and det[j].start < e.end:
            if det[j].kind == e.kind:
                agree += max(0.0, min(e.end, det[j].end) - max(e.start, det[j].start))
            j += 1
    span = sum(e.duration for e in tru)
    return DetectionScores(per_kind, agree / span if span > 0 else 1.0)


def scores_to_dict(scores: DetectionScores) -> dict:
    return {
        "per_kind": {
            k: {"precision": s.precision, "recall": s.recall, "detected": s.detected,
                "truth": s.truth, "matched": s.matched}
            for k, s in scores.per_kind.items()
        },
        "sample_agreement": scores.sample_agreement,
    }
