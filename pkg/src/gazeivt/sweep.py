"""Velocity-threshold sensitivity sweeps, participant rank orders and group contrasts."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .errors import AssignmentError, ConfigError, ZeroFixationError
from .events import GroupTable, merge_table
from .ivt import (
    DEFAULT_THRESHOLDS,
    NAMED_DEFAULT_THRESHOLDS,
    IvtConfig,
    MidpointStream,
    label_stream,
    velocity_stream,
)
from .metrics import (
    GroupMetrics,
    PersonMetrics,
    fmt_duration,
    fmt_gri,
    fmt_threshold,
    group_metrics,
    group_metrics_dict,
    person_metrics,
)
from .model import GroupAssignment, Recording

SWEEP_CSV_COLUMNS = (
    "participant_id", "group_label", "threshold_deg_s", "merging",
    "fixation_number", "mean_fixation_duration_ms", "gri",
)


@dataclass(frozen=True)
class SweepCell:
    participant_id: str
    threshold: float
    merging: bool
    metrics: PersonMetrics


@dataclass(frozen=True)
class SweepTable:
    cells: tuple[SweepCell, ...]
    thresholds: tuple[float, ...]
    merge_settings: tuple[bool, ...]
    participants: tuple[str, ...]
    group_assignments: Mapping[str, str] | None = None

    def cell(self, participant_id: str, threshold: float, merging: bool) -> SweepCell:
        for c in self.cells:
            if (c.participant_id, c.threshold, c.merging) == (participant_id, threshold, merging):
                return c
        raise KeyError((participant_id, threshold, merging))

    def select(self, threshold: float, merging: bool) -> list[SweepCell]:
        if threshold not in self.thresholds:
            raise KeyError(f"threshold {threshold:g} not in sweep {list(self.thresholds)}")
        if merging not in self.merge_settings:
            raise KeyError(f"merging={merging} not in sweep")
        return [c for c in self.cells if c.threshold == threshold and c.merging == merging]


def parse_threshold_range(text: str) -> tuple[float, ...]:
    """``start:end:step`` (end included when aligned) or a comma list."""
    try:
        parts = [float(p) for p in text.split(":" if ":" in text else ",")]
    except ValueError:
        raise ConfigError(f"cannot parse thresholds {text!r}; expected start:end:step") from None
    if ":" in text:
        if len(parts) != 3:
            raise ConfigError(f"expected start:end:step, got {text!r}")
        start, end, step = parts
        if not step > 0:
            raise ConfigError("threshold step must be positive")
        count = int((end - start) / step + 1e-9) + 1
        values = tuple(start + i * step for i in range(max(count, 0)))
    else:
        values = tuple(parts)
    if not values or any(not v > 0 for v in values):
        raise ConfigError(f"thresholds must be non-empty and positive, got {text!r}")
    return values


def metrics_for(stream: MidpointStream, recording: Recording, config: IvtConfig) -> PersonMetrics:
    """Metrics of one recording from its precomputed stream; undefined marker if no fixations."""
    labeled = label_stream(stream, config.velocity_threshold)
    table = GroupTable.from_labeled(labeled, positions=config.merging_enabled)
    if config.merging_enabled:
        table = merge_table(table, config)
    try:
        return person_metrics(table, recording.participant_id, recording.duration_ms)
    except ZeroFixationError:
        return PersonMetrics.undefined(recording.participant_id, recording.duration_ms)


def analyze(recording: Recording, config: IvtConfig) -> PersonMetrics:
    """Single-configuration metrics; raises ZeroFixationError when undefined."""
    m = metrics_for(velocity_stream(recording), recording, config)
    if not m.defined:
        raise ZeroFixationError(recording.participant_id)
    return m


def _sweep_one(recording: Recording, thresholds, merge_settings, config: IvtConfig) -> list[SweepCell]:
    stream = velocity_stream(recording)
    cells = []
    for threshold in thresholds:
        for merging in merge_settings:
            cfg = replace(config, velocity_threshold=threshold, merging_enabled=merging)
            cells.append(SweepCell(recording.participant_id, threshold, merging, metrics_for(stream, recording, cfg)))
    return cells


def run_sweep(
    recordings: Sequence[Recording],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    merge_settings: Sequence[bool] = (False, True),
    config: IvtConfig | None = None,
    group_assignments: Mapping[str, str] | None = None,
    max_workers: int = 1,
) -> SweepTable:
    """Evaluate every (participant, threshold, merging) cell.

    The velocity stream of each recording is computed once. Cell order is
    participant (input order), threshold ascending, merging false then true,
    independent of ``max_workers``.
    """
    config = config or IvtConfig()
    thresholds = tuple(sorted(float(t) for t in thresholds))
    if not thresholds or any(not t > 0 for t in thresholds):
        raise ConfigError("thresholds must be non-empty and positive")
    merge_settings = tuple(sorted(set(bool(m) for m in merge_settings)))
    if not merge_settings:
        raise ConfigError("at least one merge setting required")
    ids = [r.participant_id for r in recordings]
    if len(set(ids)) != len(ids):
        raise ConfigError("participant ids must be unique within a sweep")
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            per = list(pool.map(lambda r: _sweep_one(r, thresholds, merge_settings, config), recordings))
    else:
        per = [_sweep_one(r, thresholds, merge_settings, config) for r in recordings]
    return SweepTable(
        cells=tuple(c for cells in per for c in cells),
        thresholds=thresholds,
        merge_settings=merge_settings,
        participants=tuple(ids),
        group_assignments=dict(group_assignments) if group_assignments is not None else None,
    )


def rank_order(table: SweepTable, threshold: float, merging: bool) -> list[str]:
    """Participants by ascending GRI; ties by id; undefined GRIs last."""
    cells = table.select(threshold, merging)
    return [
        c.participant_id
        for c in sorted(cells, key=lambda c: (not c.metrics.defined, c.metrics.gri or 0.0, c.participant_id))
    ]


def _assignment_map(assignments) -> dict[str, str]:
    if isinstance(assignments, Mapping):
        return dict(assignments)
    out: dict[str, str] = {}
    for a in assignments:
        if not isinstance(a, GroupAssignment):
            raise TypeError("expected GroupAssignment items")
        if a.participant_id in out:
            raise AssignmentError(f"participant {a.participant_id!r} assigned twice")
        out[a.participant_id] = a.group_label
    return out


def group_contrast(table: SweepTable, assignments, threshold: float, merging: bool) -> list[GroupMetrics]:
    """One :class:`GroupMetrics` per group label, in first-appearance order."""
    mapping = _assignment_map(assignments)
    missing = [p for p in table.participants if p not in mapping]
    if missing:
        raise AssignmentError(f"participant(s) without group assignment: {', '.join(missing)}")
    by_group: dict[str, list[PersonMetrics]] = {}
    for c in table.select(threshold, merging):
        by_group.setdefault(mapping[c.participant_id], []).append(c.metrics)
    return [group_metrics(members, label) for label, members in by_group.items()]


# --------------------------------------------------------------------------- serialization


def sweep_to_csv(table: SweepTable) -> str:
    groups = table.group_assignments or {}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_CSV_COLUMNS)
    for c in table.cells:
        m = c.metrics
        writer.writerow([
            c.participant_id,
            groups.get(c.participant_id, ""),
            fmt_threshold(c.threshold),
            "true" if c.merging else "false",
            m.fixation_number,
            fmt_duration(m.mean_fixation_duration),
            fmt_gri(m.gri),
        ])
    return buf.getvalue()


def sweep_to_json(table: SweepTable) -> str:
    groups = table.group_assignments or {}
    doc = {
        "thresholds": [
            {"threshold_deg_s": t, "named_default": t in NAMED_DEFAULT_THRESHOLDS} for t in table.thresholds
        ],
        "merge_settings": list(table.merge_settings),
        "cells": [
            {
                "participant_id": c.participant_id,
                "group_label": groups.get(c.participant_id),
                "threshold_deg_s": c.threshold,
                "named_default": c.threshold in NAMED_DEFAULT_THRESHOLDS,
                "merging": c.merging,
                "fixation_number": c.metrics.fixation_number,
                "mean_fixation_duration_ms": (
                    None if c.metrics.mean_fixation_duration is None else round(c.metrics.mean_fixation_duration, 2)
                ),
                "gri": None if c.metrics.gri is None else round(c.metrics.gri, 3),
                "gri_defined": c.metrics.defined,
                "total_fixation_duration_ms": round(c.metrics.total_fixation_duration, 2),
                "recording_duration_ms": round(c.metrics.recording_duration, 2),
            }
            for c in table.cells
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def contrast_rows(table: SweepTable, assignments) -> list[dict]:
    rows = []
    for t in table.thresholds:
        for merging in table.merge_settings:
            for g in group_contrast(table, assignments, t, merging):
                rows.append({"threshold_deg_s": t, "merging": merging, **group_metrics_dict(g)})
    return rows


def contrast_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "group_label", "threshold_deg_s", "merging", "member_count",
        "mean_fixation_number", "se_fixation_number",
        "mean_fixation_duration_ms", "se_fixation_duration_ms", "gri",
    ])

    def opt(v):
        return "" if v is None else f"{v:.2f}"

    for r in rows:
        writer.writerow([
            r["group_label"], fmt_threshold(r["threshold_deg_s"]), "true" if r["merging"] else "false",
            r["member_count"], f"{r['mean_fixation_number']:.2f}", opt(r["se_fixation_number"]),
            f"{r['mean_fixation_duration']:.2f}", opt(r["se_fixation_duration"]), f"{r['gri']:.3f}",
        ])
    return buf.getvalue()
