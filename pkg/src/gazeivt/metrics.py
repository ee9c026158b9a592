"""Fixation number, mean fixation duration and Gaze Relational Index.

GRI is mean fixation duration divided by fixation number (ms per fixation).
For a group it is the ratio of the group means, not the mean of the
members' GRIs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from statistics import fmean, stdev
from typing import Iterable, Sequence

from .errors import InsufficientDataError, ZeroFixationError
from .events import GroupTable
from .ivt import SampleLabel

METRICS_CSV_COLUMNS = (
    "participant_id", "threshold", "merging", "fixation_number", "mean_fixation_duration_ms",
    "gri", "total_fixation_duration_ms", "recording_duration_ms",
)
UNDEFINED = "undefined"


@dataclass(frozen=True)
class PersonMetrics:
    """Per-participant parameters.

    ``mean_fixation_duration`` and ``gri`` are ``None`` only for the explicit
    undefined marker built by :meth:`undefined` (no fixations).
    """

    participant_id: str
    fixation_number: int
    mean_fixation_duration: float | None
    gri: float | None
    total_fixation_duration: float
    recording_duration: float

    @property
    def defined(self) -> bool:
        return self.gri is not None

    @classmethod
    def undefined(cls, participant_id: str, recording_duration: float) -> PersonMetrics:
        return cls(participant_id, 0, None, None, 0.0, recording_duration)


@dataclass(frozen=True)
class GroupMetrics:
    group_label: str
    mean_fixation_number: float
    mean_fixation_duration: float
    gri: float
    member_count: int
    # Standard errors of the member means (descriptive; None for a single member).
    se_fixation_number: float | None = None
    se_fixation_duration: float | None = None


def gri(mean_fixation_duration: float, fixation_number: float) -> float:
    if not fixation_number > 0:
        raise InsufficientDataError("GRI undefined without fixations")
    return mean_fixation_duration / fixation_number


def person_metrics(groups, participant_id: str, recording_duration: float) -> PersonMetrics:
    """Metrics over the fixation groups of ``groups`` (EventGroup list or GroupTable)."""
    if isinstance(groups, GroupTable):
        durations = groups.fixation_durations().tolist()
    else:
        durations = [g.duration for g in groups if g.kind == SampleLabel.FIXATION]
    if not durations:
        raise ZeroFixationError(participant_id)
    total = math.fsum(durations)
    n = len(durations)
    mean = total / n
    return PersonMetrics(participant_id, n, mean, gri(mean, n), total, float(recording_duration))


def _se(values: Sequence[float]) -> float | None:
    if len(values) < 2:
        return None
    return stdev(values) / math.sqrt(len(values))


def group_metrics(members: Sequence[PersonMetrics], group_label: str) -> GroupMetrics:
    if not members:
        raise InsufficientDataError(f"group {group_label!r} has no members")
    undefined = [m.participant_id for m in members if not m.defined]
    if undefined:
        raise ZeroFixationError(undefined[0])
    fixnr = [float(m.fixation_number) for m in members]
    fixdur = [m.mean_fixation_duration for m in members]
    mean_nr, mean_dur = fmean(fixnr), fmean(fixdur)
    return GroupMetrics(
        group_label=group_label,
        mean_fixation_number=mean_nr,
        mean_fixation_duration=mean_dur,
        gri=gri(mean_dur, mean_nr),
        member_count=len(members),
        se_fixation_number=_se(fixnr),
        se_fixation_duration=_se(fixdur),
    )


# --------------------------------------------------------------------------- formatting


def fmt_threshold(value: float) -> str:
    return f"{value:g}"


def fmt_duration(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.2f}"


def fmt_gri(value: float | None) -> str:
    return UNDEFINED if value is None else f"{value:.3f}"


def metrics_rows(entries: Iterable[tuple[PersonMetrics, float, bool]]) -> list[dict]:
    rows = []
    for m, threshold, merging in entries:
        rows.append({
            "participant_id": m.participant_id,
            "threshold": fmt_threshold(threshold),
            "merging": "true" if merging else "false",
            "fixation_number": str(m.fixation_number),
            "mean_fixation_duration_ms": fmt_duration(m.mean_fixation_duration),
            "gri": fmt_gri(m.gri),
            "total_fixation_duration_ms": fmt_duration(m.total_fixation_duration),
            "recording_duration_ms": fmt_duration(m.recording_duration),
        })
    return rows


def metrics_to_csv(entries: Iterable[tuple[PersonMetrics, float, bool]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=METRICS_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(metrics_rows(entries))
    return buf.getvalue()


def _round(value: float | None, digits: int) -> float | None:
    return None if value is None else round(value, digits)


def metrics_to_json(entries: Iterable[tuple[PersonMetrics, float, bool]]) -> str:
    items = []
    for m, threshold, merging in entries:
        items.append({
            "participant_id": m.participant_id,
            "threshold": threshold,
            "merging": merging,
            "fixation_number": m.fixation_number,
            "mean_fixation_duration_ms": _round(m.mean_fixation_duration, 2),
            "gri": _round(m.gri, 3),
            "gri_defined": m.defined,
            "total_fixation_duration_ms": _round(m.total_fixation_duration, 2),
            "recording_duration_ms": _round(m.recording_duration, 2),
        })
    return json.dumps(items, indent=1) + "\n"


def group_metrics_dict(g: GroupMetrics) -> dict:
    d = asdict(g)
    d["gri"] = round(g.gri, 3)
    return d
