"""Collapse labeled midpoint samples into event groups and merge nearby fixations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateGeometryError, InsufficientDataError
from .geometry import binocular_velocity, binocular_velocity_many, mean_position, visual_angle, visual_angle_many
from .ivt import IvtConfig, LabeledStream, SampleLabel, label_stream, velocity_stream
from .model import Point2, Point3, Recording

EyePair = tuple[Point3 | None, Point3 | None]


@dataclass(frozen=True)
class EventGroup:
    """One fixation, saccade or invalid interval.

    ``sample_count`` and the mean positions cover the constituent samples of
    the group's own kind; samples discarded by merging do not contribute.
    ``eye_counts`` holds, per eye, how many of those samples carried
    positions (the weights used when groups are merged). ``sample_start`` /
    ``sample_stop`` give the half-open range of midpoint indices covered.
    ``index`` is the 1-based ordinal of the group among groups of its kind.
    """

    kind: SampleLabel
    start: float
    end: float
    sample_count: int
    index: int
    mean_eye3d: EyePair = (None, None)
    mean_gaze3d: EyePair = (None, None)
    mean_gaze2d: Point2 | None = None
    eye_counts: tuple[int, int] = (0, 0)
    gaze2d_count: int = 0
    sample_start: int = 0
    sample_stop: int = 0

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def is_fixation(self) -> bool:
        return self.kind == SampleLabel.FIXATION


def _group_means(values: np.ndarray, starts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-run means of rows of ``values`` skipping NaN rows, and the counts used."""
    present = ~np.isnan(values[:, 0])
    sums = np.add.reduceat(np.where(present[:, None], values, 0.0), starts, axis=0)
    counts = np.add.reduceat(present.astype(np.int64), starts)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts[:, None]
    return means, counts


def _ordinals(kind: np.ndarray) -> np.ndarray:
    index = np.zeros(kind.size, dtype=np.int64)
    for k in SampleLabel:
        mask = kind == k
        index[mask] = np.arange(1, int(mask.sum()) + 1)
    return index


@dataclass(frozen=True, eq=False)
class GroupTable:
    """Column-wise event groups, the working representation of the pipeline.

    Shapes for ``G`` groups: ``eye``/``gaze`` (G, 2, 3) per-eye mean
    positions (NaN where the eye has no samples), ``eye_n`` (G, 2),
    ``gaze2d`` (G, 2), remaining columns (G,). The position columns are
    ``None`` when built without positions (enough for metrics).
    """

    kind: np.ndarray
    start: np.ndarray
    end: np.ndarray
    sample_count: np.ndarray
    sample_start: np.ndarray
    sample_stop: np.ndarray
    eye: np.ndarray | None = None
    gaze: np.ndarray | None = None
    eye_n: np.ndarray | None = None
    gaze2d: np.ndarray | None = None
    gaze2d_n: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.kind.size)

    @property
    def has_positions(self) -> bool:
        return self.eye is not None

    @property
    def durations(self) -> np.ndarray:
        return self.end - self.start

    def fixation_durations(self) -> np.ndarray:
        return (self.end - self.start)[self.kind == SampleLabel.FIXATION]

    @classmethod
    def from_labeled(cls, labeled: LabeledStream, positions: bool = True) -> GroupTable:
        stream, labels = labeled.stream, labeled.labels
        n = len(labels)
        if n == 0:
            raise InsufficientDataError("cannot group an empty labeled stream")
        t = stream.timestamps
        starts = np.concatenate(([0], np.flatnonzero(labels[1:] != labels[:-1]) + 1))
        stops = np.concatenate((starts[1:], [n]))
        bounds = (t[stops[:-1] - 1] + t[starts[1:]]) / 2
        cols = dict(
            kind=labels[starts].astype(np.int8),
            start=np.concatenate(([t[0]], bounds)),
            end=np.concatenate((bounds, [t[-1]])),
            sample_count=stops - starts,
            sample_start=starts,
            sample_stop=stops,
        )
        if positions:
            le, nl = _group_means(stream.left_eye, starts)
            re, nr = _group_means(stream.right_eye, starts)
            lg, _ = _group_means(stream.left_gaze, starts)
            rg, _ = _group_means(stream.right_gaze, starts)
            g2, n2 = _group_means(stream.gaze2d, starts)
            cols.update(
                eye=np.stack((le, re), axis=1),
                gaze=np.stack((lg, rg), axis=1),
                eye_n=np.stack((nl, nr), axis=1),
                gaze2d=g2,
                gaze2d_n=n2,
            )
        return cls(**cols)

    @classmethod
    def from_groups(cls, groups: Sequence[EventGroup]) -> GroupTable:
        g = len(groups)
        nan3 = (np.nan,) * 3

        def pts(attr, side):
            return [nan3 if getattr(x, attr)[side] is None else getattr(x, attr)[side] for x in groups]

        eye = np.empty((g, 2, 3))
        gaze = np.empty((g, 2, 3))
        for side in (0, 1):
            eye[:, side] = np.array(pts("mean_eye3d", side), dtype=float).reshape(g, 3)
            gaze[:, side] = np.array(pts("mean_gaze3d", side), dtype=float).reshape(g, 3)
        return cls(
            kind=np.array([int(x.kind) for x in groups], dtype=np.int8),
            start=np.array([x.start for x in groups], dtype=float),
            end=np.array([x.end for x in groups], dtype=float),
            sample_count=np.array([x.sample_count for x in groups], dtype=np.int64),
            sample_start=np.array([x.sample_start for x in groups], dtype=np.int64),
            sample_stop=np.array([x.sample_stop for x in groups], dtype=np.int64),
            eye=eye,
            gaze=gaze,
            eye_n=np.array([x.eye_counts for x in groups], dtype=np.int64).reshape(g, 2),
            gaze2d=np.array(
                [(np.nan, np.nan) if x.mean_gaze2d is None else x.mean_gaze2d for x in groups], dtype=float
            ).reshape(g, 2),
            gaze2d_n=np.array([x.gaze2d_count for x in groups], dtype=np.int64),
        )

    def to_groups(self) -> list[EventGroup]:
        if not self.has_positions:
            raise ValueError("group table was built without positions")
        kind = [SampleLabel(int(k)) for k in self.kind]
        index = _ordinals(self.kind).tolist()
        start, end = self.start.tolist(), self.end.tolist()
        count, s0, s1 = self.sample_count.tolist(), self.sample_start.tolist(), self.sample_stop.tolist()
        eye, gaze, eye_n = self.eye.tolist(), self.gaze.tolist(), self.eye_n.tolist()
        g2, n2 = self.gaze2d.tolist(), self.gaze2d_n.tolist()
        out = []
        for k in range(len(kind)):
            nl, nr = eye_n[k]
            out.append(EventGroup(
                kind=kind[k],
                start=start[k],
                end=end[k],
                sample_count=count[k],
                index=index[k],
                mean_eye3d=(tuple(eye[k][0]) if nl else None, tuple(eye[k][1]) if nr else None),
                mean_gaze3d=(tuple(gaze[k][0]) if nl else None, tuple(gaze[k][1]) if nr else None),
                mean_gaze2d=tuple(g2[k]) if n2[k] else None,
                eye_counts=(nl, nr),
                gaze2d_count=n2[k],
                sample_start=s0[k],
                sample_stop=s1[k],
            ))
        return out


def group_events(labeled: LabeledStream | Iterable) -> list[EventGroup]:
    """Maximal runs of equal labels, one group each.

    Interior boundaries lie halfway between the last sample of one group and
    the first sample of the next; the first group starts at its first sample
    and the last group ends at its last sample, so groups tile the stream.
    """
    if not isinstance(labeled, LabeledStream):
        labeled = LabeledStream.from_pairs(labeled)
    return GroupTable.from_labeled(labeled).to_groups()


def fixation_separation(f1: EventGroup, f2: EventGroup) -> float | None:
    """Binocular visual angle (degrees) between two fixation groups.

    Per eye, the angle between the two mean gaze points is taken from the
    mean of the two groups' mean eye positions; eyes lacking positions in
    either group are skipped. ``None`` when no eye is usable.
    """
    return _separation(f1.mean_eye3d, f1.mean_gaze3d, f2.mean_eye3d, f2.mean_gaze3d)


def _separation(eye1, gaze1, eye2, gaze2) -> float | None:
    angles = []
    for side in (0, 1):
        if eye1[side] is None or eye2[side] is None:
            angles.append(None)
            continue
        try:
            angles.append(visual_angle(mean_position(eye1[side], eye2[side]), gaze1[side], gaze2[side]))
        except DegenerateGeometryError:
            angles.append(None)
    return binocular_velocity(*angles)


def _separation_many(table: GroupTable, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    per_eye = []
    for side in (0, 1):
        usable = (table.eye_n[a, side] > 0) & (table.eye_n[b, side] > 0)
        mean_eye = (table.eye[a, side] + table.eye[b, side]) / 2
        angle = visual_angle_many(mean_eye, table.gaze[a, side], table.gaze[b, side])
        angle[~usable] = np.nan
        per_eye.append(angle)
    return binocular_velocity_many(*per_eye)


def _weighted_rows(table: GroupTable) -> np.ndarray:
    """Per row ``[nL, nL*eyeL, nL*gazeL, nR, nR*eyeR, nR*gazeR, n2d, n2d*gaze2d]`` (17 columns)."""
    parts = []
    for side in (0, 1):
        n = table.eye_n[:, side].astype(float)
        used = (n > 0)[:, None]
        parts += [
            n[:, None],
            np.where(used, table.eye[:, side] * n[:, None], 0.0),
            np.where(used, table.gaze[:, side] * n[:, None], 0.0),
        ]
    n2 = table.gaze2d_n.astype(float)
    parts += [n2[:, None], np.where((n2 > 0)[:, None], table.gaze2d * n2[:, None], 0.0)]
    return np.hstack(parts)


def _side_angle(s, w, o: int) -> float | None:
    """Angle for one eye between summed positions ``s`` and ``w`` (columns from offset ``o``)."""
    n1, n2 = s[o], w[o]
    if not n1 or not n2:
        return None
    ex, ey, ez = (s[o + 1] / n1 + w[o + 1] / n2) / 2, (s[o + 2] / n1 + w[o + 2] / n2) / 2, \
        (s[o + 3] / n1 + w[o + 3] / n2) / 2
    try:
        return visual_angle((ex, ey, ez), (s[o + 4] / n1, s[o + 5] / n1, s[o + 6] / n1),
                            (w[o + 4] / n2, w[o + 5] / n2, w[o + 6] / n2))
    except DegenerateGeometryError:
        return None


def _merge_pass(table: GroupTable, config: IvtConfig) -> GroupTable | None:
    """One chained left-to-right merge scan; ``None`` when nothing merges."""
    fi = np.flatnonzero(table.kind == SampleLabel.FIXATION)
    if fi.size < 2:
        return None
    a, b = fi[:-1], fi[1:]
    gap_ok = (table.start[b] - table.end[a]) < config.max_time_betw_fixations
    if not gap_ok.any():
        return None
    with np.errstate(invalid="ignore"):
        direct = gap_ok & (_separation_many(table, a, b) < config.max_angle_betw_fixations)
    if not direct.any():
        return None

    # Walk the candidate pairs in order, growing clusters of consecutive
    # fixations (ordinals into ``fi``). A chained cluster is compared through
    # its running weighted sums.
    weights = _weighted_rows(table)
    rows = weights[fi].tolist()
    max_angle = config.max_angle_betw_fixations
    clusters = []  # (first, last) fixation ordinals
    first = last = -1
    sums = None
    for k in np.flatnonzero(gap_ok).tolist():
        if sums is not None and last != k:
            clusters.append((first, last))
            sums = None
        if sums is None:
            if direct[k]:
                first, last = k, k + 1
                sums = [x + y for x, y in zip(rows[k], rows[k + 1])]
            continue
        w = rows[k + 1]
        angle = binocular_velocity(_side_angle(sums, w, 0), _side_angle(sums, w, 7))
        if angle is not None and angle < max_angle:
            sums = [x + y for x, y in zip(sums, w)]
            last = k + 1
        else:
            clusters.append((first, last))
            sums = None
    if sums is not None:
        clusters.append((first, last))

    span = np.array(clusters, dtype=np.int64)
    lo, hi = fi[span[:, 0]], fi[span[:, 1]]
    # exact per-cluster sums over the member fixation rows
    padded = np.vstack((weights[fi], np.zeros((1, weights.shape[1]))))
    bounds = np.column_stack((span[:, 0], span[:, 1] + 1)).ravel()
    merged = np.add.reduceat(padded, bounds, axis=0)[::2]
    counts = np.add.reduceat(np.append(table.sample_count[fi], 0), bounds)[::2]

    keep = np.ones(len(table), bool)
    for x, y in zip(lo.tolist(), hi.tolist()):
        keep[x + 1:y + 1] = False
    end = table.end.copy()
    stop = table.sample_stop.copy()
    count = table.sample_count.copy()
    eye, gaze, eye_n = table.eye.copy(), table.gaze.copy(), table.eye_n.copy()
    g2, g2n = table.gaze2d.copy(), table.gaze2d_n.copy()
    end[lo], stop[lo], count[lo] = table.end[hi], table.sample_stop[hi], counts
    with np.errstate(invalid="ignore", divide="ignore"):
        for side, o in ((0, 0), (1, 7)):
            n = merged[:, o]
            eye[lo, side] = np.where((n > 0)[:, None], merged[:, o + 1:o + 4] / n[:, None], np.nan)
            gaze[lo, side] = np.where((n > 0)[:, None], merged[:, o + 4:o + 7] / n[:, None], np.nan)
            eye_n[lo, side] = n.astype(eye_n.dtype)
        n = merged[:, 14]
        g2[lo] = np.where((n > 0)[:, None], merged[:, 15:17] / n[:, None], np.nan)
        g2n[lo] = n.astype(g2n.dtype)
    return GroupTable(
        kind=table.kind[keep], start=table.start[keep], end=end[keep],
        sample_count=count[keep], sample_start=table.sample_start[keep], sample_stop=stop[keep],
        eye=eye[keep], gaze=gaze[keep], eye_n=eye_n[keep], gaze2d=g2[keep], gaze2d_n=g2n[keep],
    )


def merge_table(table: GroupTable, config: IvtConfig) -> GroupTable:
    if not table.has_positions:
        raise ValueError("merging needs group positions")
    while True:
        merged = _merge_pass(table, config)
        if merged is None:
            return table
        table = merged


def merge_fixations(groups: Sequence[EventGroup], config: IvtConfig) -> list[EventGroup]:
    """Merge fixation groups that are close in time and space.

    Consecutive fixation groups f1, f2 merge when the gap between the end of
    f1 and the start of f2 is below ``max_time_betw_fixations`` and their
    separation angle (:func:`fixation_separation`) is below
    ``max_angle_betw_fixations``; the groups between them are discarded and
    the merged positions are sample-count-weighted means. The scan is left
    to right and chained: a merged group is immediately compared with the
    next fixation. Scans repeat until one performs no merge.
    """
    if not config.merging_enabled or not groups:
        return list(groups)
    return merge_table(GroupTable.from_groups(groups), config).to_groups()


def segment_table(recording: Recording, config: IvtConfig) -> GroupTable:
    labeled = label_stream(velocity_stream(recording), config.velocity_threshold)
    table = GroupTable.from_labeled(labeled)
    return merge_table(table, config) if config.merging_enabled else table


def segment(recording: Recording, config: IvtConfig) -> list[EventGroup]:
    return segment_table(recording, config).to_groups()


def fixations(groups: Iterable[EventGroup]) -> list[EventGroup]:
    return [g for g in groups if g.kind == SampleLabel.FIXATION]


# --------------------------------------------------------------------------- serialization


def _pair(p: EyePair):
    return {"left": None if p[0] is None else list(p[0]), "right": None if p[1] is None else list(p[1])}


def _unpair(d) -> EyePair:
    if d is None:
        return (None, None)
    return tuple(None if d.get(k) is None else tuple(float(v) for v in d[k]) for k in ("left", "right"))


def event_to_dict(g: EventGroup) -> dict:
    return {
        "kind": g.kind.token,
        "index": g.index,
        "start_ms": g.start,
        "end_ms": g.end,
        "duration_ms": g.duration,
        "sample_count": g.sample_count,
        "mean_gaze3d": _pair(g.mean_gaze3d),
        "mean_eye3d": _pair(g.mean_eye3d),
        "mean_gaze2d": None if g.mean_gaze2d is None else list(g.mean_gaze2d),
    }


def events_to_json(groups: Iterable[EventGroup]) -> str:
    return json.dumps([event_to_dict(g) for g in groups], indent=1) + "\n"


def events_from_json(text: str) -> list[EventGroup]:
    """Read an event list. Only ``kind``, ``start_ms`` and ``end_ms`` are required."""
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("event list JSON must be an array")
    out = []
    counters = {kind: 0 for kind in SampleLabel}
    for i, item in enumerate(data):
        try:
            kind = SampleLabel.from_token(item["kind"])
            start, end = float(item["start_ms"]), float(item["end_ms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"event {i}: {exc}") from None
        counters[kind] += 1
        g2 = item.get("mean_gaze2d")
        eye3d, gaze3d = _unpair(item.get("mean_eye3d")), _unpair(item.get("mean_gaze3d"))
        n = int(item.get("sample_count") or 1)
        out.append(EventGroup(
            kind=kind, start=start, end=end,
            sample_count=n,
            index=int(item.get("index", counters[kind])),
            mean_eye3d=eye3d, mean_gaze3d=gaze3d,
            mean_gaze2d=None if g2 is None else tuple(float(v) for v in g2),
            eye_counts=tuple(n if p is not None else 0 for p in eye3d),
            gaze2d_count=0 if g2 is None else n,
        ))
    return out
