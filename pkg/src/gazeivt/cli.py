"""Command-line interface: analyze, sweep, synth, score, validate.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
Every command that writes files also writes ``manifest.json`` recording the
full configuration and input digests of the run.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .errors import ConfigError, DataError
from .events import events_from_json, events_to_json, segment_table
from .ivt import DEFAULT_MAX_ANGLE_DEG, DEFAULT_MAX_GAP_MS, IvtConfig
from .metrics import metrics_to_csv, metrics_to_json, person_metrics
from .model import DEFAULT_SAMPLE_RATE_HZ, assignments_by_participant, parse_group_assignments
from .model import parse_recording, serialize_recording, validate, window
from .sweep import contrast_rows, contrast_to_csv, parse_threshold_range, run_sweep, sweep_to_csv, sweep_to_json
from .synth import (
    EyeGeometry,
    GroundTruth,
    TruthEvent,
    generate_trace,
    scenario_from_json,
    score_detection,
    scores_to_dict,
    truth_to_json,
)

log = logging.getLogger("gazeivt")

DEFAULT_WINDOW_MS = 1_200_000.0
DEFAULT_THRESHOLD_RANGE = "10:150:10"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _input_paths(args) -> list[Path]:
    paths = [Path(p) for p in (args.input or [])]
    if args.input_dir:
        d = Path(args.input_dir)
        if not d.is_dir():
            raise UsageError(f"--input-dir {d} is not a directory")
        paths += sorted(d.glob("*.tsv"))
    if not paths:
        raise UsageError("no input recordings; use --input or --input-dir")
    return paths


def _load(paths: list[Path], rate_hz: float, window_ms: float | None):
    recordings = []
    for p in paths:
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"{p}: {exc.strerror}") from None
        try:
            rec = parse_recording(text, p.stem, sample_rate_hz=rate_hz)
            if window_ms:
                rec = window(rec, 0.0, window_ms)
        except DataError as exc:
            raise DataError(f"{p}: {exc}") from None
        recordings.append(rec)
    ids = [r.participant_id for r in recordings]
    if len(set(ids)) != len(ids):
        raise UsageError("input files must have distinct names (participant ids)")
    return recordings


def _config(args, threshold: float, merging: bool) -> IvtConfig:
    return IvtConfig(
        velocity_threshold=threshold,
        merging_enabled=merging,
        max_time_betw_fixations=args.max_gap_ms,
        max_angle_betw_fixations=args.max_gap_deg,
    )


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _manifest(out: Path, command: str, inputs: list[Path], argv: list[str], **extra) -> None:
    doc = {
        "command": command,
        "tool_version": __version__,
        "argv": argv,
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
        **extra,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    _write(out / "manifest.json", json.dumps(doc, indent=1, sort_keys=False) + "\n")


def _window_arg(args) -> float | None:
    if args.window_ms < 0:
        raise ConfigError("--window-ms must be >= 0")
    return args.window_ms or None


# --------------------------------------------------------------------------- commands


def cmd_analyze(args) -> int:
    config = _config(args, args.threshold, args.merge)
    paths = _input_paths(args)
    recordings = _load(paths, args.rate_hz, _window_arg(args))
    out = Path(args.out)
    entries = []
    for rec in recordings:
        table = segment_table(rec, config)
        entries.append((person_metrics(table, rec.participant_id, rec.duration_ms), config.velocity_threshold,
                        config.merging_enabled))
        if args.events:
            _write(out / "events" / f"{rec.participant_id}.json", events_to_json(table.to_groups()))
    if args.format == "json":
        _write(out / "metrics.json", metrics_to_json(entries))
    else:
        _write(out / "metrics.csv", metrics_to_csv(entries))
    _manifest(
        out, "analyze", paths, args.argv,
        config=asdict(config),
        thresholds=[config.velocity_threshold],
        window_ms=_window_arg(args),
        sample_rate_hz=args.rate_hz,
        recording_duration_ms={r.participant_id: r.duration_ms for r in recordings},
    )
    return 0


def cmd_sweep(args) -> int:
    thresholds = parse_threshold_range(args.thresholds)
    merge_settings = (False, True) if args.merge is None else (args.merge,)
    base = _config(args, thresholds[0], False)
    paths = _input_paths(args)
    recordings = _load(paths, args.rate_hz, _window_arg(args))
    groups = None
    manifest_inputs = list(paths)
    if args.groups:
        gpath = Path(args.groups)
        try:
            groups = assignments_by_participant(parse_group_assignments(gpath.read_text(encoding="utf-8")))
        except OSError as exc:
            raise DataError(f"{gpath}: {exc.strerror}") from None
        manifest_inputs.append(gpath)
    table = run_sweep(recordings, thresholds, merge_settings, base, group_assignments=groups)
    out = Path(args.out)
    if groups is not None:
        rows = contrast_rows(table, groups)
    if args.format == "json":
        _write(out / "sweep.json", sweep_to_json(table))
        if groups is not None:
            _write(out / "groups.json", json.dumps(rows, indent=1) + "\n")
    else:
        _write(out / "sweep.csv", sweep_to_csv(table))
        if groups is not None:
            _write(out / "groups.csv", contrast_to_csv(rows))
    _manifest(
        out, "sweep", manifest_inputs, args.argv,
        config={k: v for k, v in asdict(base).items() if k not in ("velocity_threshold", "merging_enabled")},
        thresholds=list(thresholds),
        merge_settings=list(merge_settings),
        window_ms=_window_arg(args),
        sample_rate_hz=args.rate_hz,
        recording_duration_ms={r.participant_id: r.duration_ms for r in recordings},
    )
    return 0


def cmd_synth(args) -> int:
    script = Path(args.script)
    geometry = EyeGeometry(args.interocular_mm, args.viewing_distance_mm)
    try:
        text = script.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{script}: {exc.strerror}") from None
    scenario = scenario_from_json(text, geometry)
    pid = args.participant or script.stem
    rec, truth = generate_trace(scenario, args.rate_hz, geometry, args.noise_deg, args.seed, participant_id=pid)
    out = Path(args.out)
    _write(out / f"{pid}.tsv", serialize_recording(rec))
    _write(out / f"{pid}.truth.json", truth_to_json(truth, rec.timestamps))
    _manifest(
        out, "synth", [script], args.argv,
        seed=args.seed,
        sample_rate_hz=args.rate_hz,
        noise_deg=args.noise_deg,
        geometry=asdict(geometry),
    )
    return 0


def _read_events(path: Path):
    try:
        return events_from_json(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_score(args) -> int:
    detected = _read_events(Path(args.detected))
    truth = GroundTruth(tuple(TruthEvent(g.kind, g.start, g.end) for g in _read_events(Path(args.truth))))
    if not args.tol_ms >= 0:
        raise ConfigError("--tol-ms must be >= 0")
    report = scores_to_dict(score_detection(detected, truth, args.tol_ms))
    report["boundary_tolerance_ms"] = args.tol_ms
    text = json.dumps(report, indent=1) + "\n"
    if args.out:
        out = Path(args.out)
        _write(out / "score.json", text)
        _manifest(out, "score", [Path(args.detected), Path(args.truth)], args.argv, boundary_tolerance_ms=args.tol_ms)
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    paths = _input_paths(args)
    report = {}
    for p, rec in zip(paths, _load(paths, args.rate_hz, None)):
        report[rec.participant_id] = [asdict(i) for i in validate(rec)]
    if args.format == "json":
        sys.stdout.write(json.dumps(report, indent=1) + "\n")
    else:
        for pid, issues in report.items():
            if not issues:
                print(f"{pid}: ok")
            for issue in issues:
                print(f"{pid}: {issue['message']}")
    return 0


# --------------------------------------------------------------------------- parser


def _add_inputs(p):
    p.add_argument("--input", action="append", metavar="FILE", help="Gaze-TSV recording (repeatable)")
    p.add_argument("--input-dir", metavar="DIR", help="directory of *.tsv recordings")
    p.add_argument("--rate-hz", type=float, default=DEFAULT_SAMPLE_RATE_HZ, help="nominal sample rate (default 100)")


def _add_pipeline(p):
    p.add_argument("--max-gap-ms", type=float, default=DEFAULT_MAX_GAP_MS,
                   help="max time between fixations for merging (default 75)")
    p.add_argument("--max-gap-deg", type=float, default=DEFAULT_MAX_ANGLE_DEG,
                   help="max angle between fixations for merging (default 0.5)")
    p.add_argument("--window-ms", type=float, default=DEFAULT_WINDOW_MS,
                   help="analyze only the first N ms (default 1200000 = 20 min; 0 disables)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default="out", help="output directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gazeivt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="metrics at one velocity threshold")
    _add_inputs(p)
    p.add_argument("--threshold", type=float, default=30.0, help="velocity threshold in deg/s (default 30)")
    p.add_argument("--merge", action=argparse.BooleanOptionalAction, default=False,
                   help="merge nearby fixations (default off)")
    p.add_argument("--events", action="store_true", help="also write per-participant event lists")
    _add_pipeline(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="metrics over a grid of thresholds and merge settings")
    _add_inputs(p)
    p.add_argument("--thresholds", default=DEFAULT_THRESHOLD_RANGE,
                   help="start:end:step, end included when aligned (default 10:150:10), or a comma list")
    p.add_argument("--merge", action=argparse.BooleanOptionalAction, default=None,
                   help="restrict to merging on/off (default: both)")
    p.add_argument("--groups", metavar="CSV", help="participant_id,group_label file; adds group contrasts")
    _add_pipeline(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic trace and its ground truth")
    p.add_argument("--script", required=True, help="scenario JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rate-hz", type=float, default=DEFAULT_SAMPLE_RATE_HZ)
    p.add_argument("--noise-deg", type=float, default=0.0)
    p.add_argument("--interocular-mm", type=float, default=65.0)
    p.add_argument("--viewing-distance-mm", type=float, default=600.0)
    p.add_argument("--participant", help="participant id (default: script file stem)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="compare detected events with ground truth")
    p.add_argument("--detected", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--tol-ms", type=float, default=10.0, help="boundary tolerance (default 10 = one 100 Hz interval)")
    p.add_argument("--out", help="output directory (default: print to stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("validate", help="data-quality diagnostics")
    _add_inputs(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"gazeivt {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"gazeivt {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
