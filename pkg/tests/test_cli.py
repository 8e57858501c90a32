"""End-to-end tests of the command-line interface, driven in process through
cli.main so exit codes and printed output are both observable."""

import json
import shutil
from pathlib import Path

import pytest

from sdgflow.cli import main

SAMPLE_DIR = Path(__file__).resolve().parent.parent / "sample"
SAMPLE_SPEC = SAMPLE_DIR / "pipeline.json"
SAMPLE_DIGEST = "5fe0e5313e97da285b40b530033edf705350f6da1848add665afe0e2211804c7"


def sample_doc() -> dict:
    return json.loads(SAMPLE_SPEC.read_text(encoding="utf-8"))


def write_spec_copy(tmp_path, doc, with_data=True, with_schema=True):
    """Drop a modified pipeline next to copies of the sample's data files."""
    if with_data:
        shutil.copy(SAMPLE_DIR / "data.csv", tmp_path / "data.csv")
    if with_schema:
        shutil.copy(SAMPLE_DIR / "schema.json", tmp_path / "schema.json")
    spec_path = tmp_path / "pipeline.json"
    spec_path.write_text(json.dumps(doc), encoding="utf-8")
    return spec_path


# ----------------------------------------------------------------- validate ---

def test_validate_sample_ok(capsys):
    rc = main(["validate", str(SAMPLE_SPEC)])
    out = capsys.readouterr().out
    assert rc == 0
    assert f"ok: 7 nodes, sha256 {SAMPLE_DIGEST}" in out


def test_validate_syntax_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{ not json", encoding="utf-8")
    rc = main(["validate", str(bad)])
    assert rc == 2
    assert "syntax:" in capsys.readouterr().out


def test_validate_missing_file_exit_2(tmp_path, capsys):
    rc = main(["validate", str(tmp_path / "nope.json")])
    assert rc == 2
    assert "io:" in capsys.readouterr().out


def test_validate_cycle_exit_1(tmp_path, capsys):
    doc = sample_doc()
    for node in doc["nodes"]:
        if node["id"] == "clean":
            node["depends_on"] = ["load", "report"]
    spec_path = write_spec_copy(tmp_path, doc, with_data=False)
    rc = main(["validate", str(spec_path)])
    out = capsys.readouterr().out
    assert rc == 1
    assert "clean" in out and "->" in out


def test_validate_raw_export_exit_1(tmp_path, capsys):
    doc = sample_doc()
    doc["outputs"].append({"node": "load", "artifact": "dataset"})
    spec_path = write_spec_copy(tmp_path, doc, with_data=False)
    rc = main(["validate", str(spec_path)])
    out = capsys.readouterr().out
    assert rc == 1
    assert "raw data exported: load/dataset" in out


# ---------------------------------------------------------------------- run ---

def test_run_sample_passes(tmp_path, capsys):
    out_dir = tmp_path / "run"
    rc = main(["run", str(SAMPLE_SPEC), "--out", str(out_dir)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "generate: succeeded" in out
    assert "report verdict: PASS" in out
    assert (out_dir / "manifest.json").exists()
    assert (out_dir / "artifacts" / "generate" / "dataset.csv").exists()
    assert (out_dir / "report.txt").exists()


def test_run_failing_threshold_exit_1(tmp_path, capsys):
    doc = sample_doc()
    for node in doc["nodes"]:
        if node["id"] == "report":
            # normalized mixed-type distance cannot exceed 1
            node["params"]["thresholds"] = {"min_nn_distance": 1.1}
    spec_path = write_spec_copy(tmp_path, doc)
    rc = main(["run", str(spec_path), "--out", str(tmp_path / "run")])
    out = capsys.readouterr().out
    assert rc == 1
    assert "report verdict: FAIL" in out


def test_run_missing_input_exit_2(tmp_path, capsys):
    spec_path = write_spec_copy(tmp_path, sample_doc(), with_data=False)
    rc = main(["run", str(spec_path), "--out", str(tmp_path / "run")])
    out = capsys.readouterr().out
    assert rc == 2
    assert "node failure: load" in out


def test_run_invalid_spec_exit_3(tmp_path, capsys):
    doc = sample_doc()
    del doc["version"]
    spec_path = write_spec_copy(tmp_path, doc, with_data=False)
    rc = main(["run", str(spec_path), "--out", str(tmp_path / "run")])
    assert rc == 3
    assert "invalid spec:" in capsys.readouterr().out


def test_run_repeats_are_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(SAMPLE_SPEC), "--out", str(a)]) == 0
    assert main(["run", str(SAMPLE_SPEC), "--out", str(b)]) == 0
    rel = Path("artifacts") / "generate" / "dataset.csv"
    assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_run_seed_override_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(SAMPLE_SPEC), "--out", str(a)]) == 0
    assert main(["run", str(SAMPLE_SPEC), "--out", str(b), "--seed", "43"]) == 0
    rel = Path("artifacts") / "generate" / "dataset.csv"
    assert (a / rel).read_bytes() != (b / rel).read_bytes()


# ------------------------------------------------------------------ inspect ---

def test_inspect_fresh_run_exit_0(tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert main(["run", str(SAMPLE_SPEC), "--out", str(out_dir)]) == 0
    rc = main(["inspect", str(out_dir)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "verification: PASS" in out


def test_inspect_tampered_run_exit_1(tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert main(["run", str(SAMPLE_SPEC), "--out", str(out_dir)]) == 0
    target = out_dir / "artifacts" / "generate" / "dataset.csv"
    target.write_bytes(target.read_bytes() + b"x")
    rc = main(["inspect", str(out_dir)])
    out = capsys.readouterr().out
    assert rc == 1
    assert "artifact_hashes: FAIL" in out
    assert "verification: FAIL" in out


def test_inspect_missing_dir_exit_2(tmp_path, capsys):
    rc = main(["inspect", str(tmp_path / "never-ran")])
    assert rc == 2
    assert "cannot read run dir" in capsys.readouterr().out


# -------------------------------------------------------------------- bench ---

def test_bench_rejects_single_size(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--sizes", "200", "--out", str(tmp_path / "bench")])
    assert exc.value.code == 2


def test_bench_two_sizes(tmp_path, capsys):
    out_dir = tmp_path / "bench"
    rc = main(["bench", "--sizes", "200,400", "--out", str(out_dir)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "size" in out and "total_wall" in out
    assert any(line.strip().startswith("200") for line in out.splitlines())
    assert any(line.strip().startswith("400") for line in out.splitlines())
    assert (out_dir / "bench.json").exists()
