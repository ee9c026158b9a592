import csv
import io
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gazeivt.cli import main
from gazeivt.model import parse_recording
from gazeivt.synth import random_scenario, scenario_to_json


def data_files(out: Path) -> dict[str, bytes]:
    """All output bytes keyed by relative path; the manifest creation time is dropped."""
    files = {}
    for p in sorted(out.rglob("*")):
        if not p.is_file():
            continue
        rel = str(p.relative_to(out))
        if p.name == "manifest.json":
            doc = json.loads(p.read_text())
            doc.pop("created_utc")
            files[rel] = json.dumps(doc, sort_keys=True).encode()
        else:
            files[rel] = p.read_bytes()
    return files


def run_twice(argv: list[str], out: Path) -> tuple[dict, dict]:
    """Run one command twice into ``out`` and return both output snapshots."""
    snaps = []
    for _ in range(2):
        shutil.rmtree(out, ignore_errors=True)
        assert main(argv) == 0
        snaps.append(data_files(out))
    return snaps[0], snaps[1]


@pytest.fixture(scope="module")
def traces(tmp_path_factory):
    root = tmp_path_factory.mktemp("traces")
    for k in range(4):
        script = root / f"p{k + 1}.json"
        script.write_text(scenario_to_json(random_scenario(np.random.default_rng(k), 4000)))
        assert main(["synth", "--script", str(script), "--seed", str(k), "--noise-deg", "0.1",
                     "--out", str(root / "rec")]) == 0
    return root


def test_synth_writes_trace_and_truth(traces):
    rec_dir = traces / "rec"
    assert sorted(p.name for p in rec_dir.glob("p1.*")) == ["p1.truth.json", "p1.tsv"]
    rec = parse_recording((rec_dir / "p1.tsv").read_text(), "p1")
    assert len(rec) > 100
    manifest = json.loads((rec_dir / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["command"] == "synth"


def test_synth_twice_identical(traces, tmp_path):
    argv = ["synth", "--script", str(traces / "p1.json"), "--rate-hz", "100", "--seed", "7", "--out", str(tmp_path)]
    first, second = run_twice(argv, tmp_path)
    assert first == second and len(first) == 3


def test_analyze(traces, tmp_path):
    out = tmp_path / "o"
    code = main(["analyze", "--input", str(traces / "rec" / "p1.tsv"), "--threshold", "30", "--no-merge",
                 "--window-ms", "1200000", "--events", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((out / "metrics.csv").read_text())))
    assert len(rows) == 1 and rows[0]["participant_id"] == "p1" and rows[0]["threshold"] == "30"
    assert rows[0]["merging"] == "false"
    events = json.loads((out / "events" / "p1.json").read_text())
    assert sum(e["kind"] == "fixation" for e in events) == int(rows[0]["fixation_number"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["velocity_threshold"] == 30.0
    assert manifest["config"]["merging_enabled"] is False
    assert manifest["window_ms"] == 1200000
    assert len(manifest["inputs"][0]["sha256"]) == 64


def test_analyze_json(traces, tmp_path):
    assert main(["analyze", "--input-dir", str(traces / "rec"), "--merge", "--format", "json",
                 "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert [d["participant_id"] for d in doc] == ["p1", "p2", "p3", "p4"]
    assert all(d["merging"] for d in doc)


def test_threshold_zero_is_config_error(traces, tmp_path):
    assert main(["analyze", "--input", str(traces / "rec" / "p1.tsv"), "--threshold", "0",
                 "--out", str(tmp_path)]) == 1


def test_usage_errors(tmp_path):
    assert main(["analyze", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--bogus"])
    assert exc.value.code == 1


def test_bad_input_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("timestamp_ms\tnope\n")
    assert main(["analyze", "--input", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 1" in capsys.readouterr().err


def test_zero_fixations_names_participant(tmp_path, capsys):
    from gazeivt.model import serialize_recording

    from _builders import azimuth_recording

    rec = azimuth_recording(np.arange(10) * 10.0, np.arange(10) * 5.0)
    path = tmp_path / "fast.tsv"
    path.write_text(serialize_recording(rec))
    assert main(["analyze", "--input", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "fast" in capsys.readouterr().err


def test_sweep_default_grid(traces, tmp_path):
    assert main(["sweep", "--input-dir", str(traces / "rec"), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "sweep.csv").read_text())))
    assert len(rows) == 120
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["thresholds"] == [float(t) for t in range(10, 151, 10)]
    assert manifest["merge_settings"] == [False, True]


def test_single_threshold_sweep_equals_analyze(traces, tmp_path):
    rec = str(traces / "rec" / "p2.tsv")
    assert main(["sweep", "--input", rec, "--thresholds", "30:30:10", "--no-merge", "--out", str(tmp_path / "s")]) == 0
    assert main(["analyze", "--input", rec, "--out", str(tmp_path / "a")]) == 0
    s = next(csv.DictReader(io.StringIO((tmp_path / "s" / "sweep.csv").read_text())))
    a = next(csv.DictReader(io.StringIO((tmp_path / "a" / "metrics.csv").read_text())))
    assert (s["fixation_number"], s["mean_fixation_duration_ms"], s["gri"]) == (
        a["fixation_number"], a["mean_fixation_duration_ms"], a["gri"])


def test_groups(traces, tmp_path):
    groups = tmp_path / "groups.csv"
    groups.write_text("participant_id,group_label\np1,expert\np2,expert\np3,novice\np4,novice\n")
    assert main(["sweep", "--input-dir", str(traces / "rec"), "--thresholds", "30,100", "--groups", str(groups),
                 "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "o" / "groups.csv").read_text())))
    assert len(rows) == 8 and {r["group_label"] for r in rows} == {"expert", "novice"}
    groups.write_text("participant_id,group_label\np1,expert\np2,expert\np3,novice\n")
    assert main(["sweep", "--input-dir", str(traces / "rec"), "--groups", str(groups),
                 "--out", str(tmp_path / "o2")]) == 2


def test_score_identity_and_offset(traces, tmp_path, capsys):
    truth = traces / "rec" / "p1.truth.json"
    assert main(["score", "--detected", str(truth), "--truth", str(truth), "--tol-ms", "10"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert all(k["precision"] == 1.0 and k["recall"] == 1.0 for k in report["per_kind"].values())
    events = json.loads(truth.read_text())
    fix = [i for i, e in enumerate(events) if e["kind"] == "fixation"]
    for i in fix[:3]:
        events[i]["start_ms"] += 25.0
    shifted = tmp_path / "shifted.json"
    shifted.write_text(json.dumps(events))
    assert main(["score", "--detected", str(shifted), "--truth", str(truth), "--out", str(tmp_path / "s")]) == 0
    report = json.loads((tmp_path / "s" / "score.json").read_text())
    assert report["per_kind"]["fixation"]["matched"] == len(fix) - 3
    assert report["per_kind"]["fixation"]["recall"] == pytest.approx((len(fix) - 3) / len(fix))


def test_validate(traces, capsys):
    assert main(["validate", "--input", str(traces / "rec" / "p1.tsv"), "--rate-hz", "50"]) == 0
    assert "differs from nominal" in capsys.readouterr().out
    assert main(["validate", "--input", str(traces / "rec" / "p1.tsv"), "--format", "json"]) == 0
    assert "p1" in json.loads(capsys.readouterr().out)


def test_malformed_scenario(tmp_path):
    script = tmp_path / "s.json"
    script.write_text('[{"kind": "fixation"}]')
    assert main(["synth", "--script", str(script), "--seed", "1", "--out", str(tmp_path)]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gazeivt", "analyze", "--threshold", "0",
                           "--input", "missing.tsv"], capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 1
    proc = subprocess.run([sys.executable, "-m", "gazeivt", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
