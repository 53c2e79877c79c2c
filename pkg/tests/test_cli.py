import json
import subprocess
import sys

import numpy as np
import pytest

from exalt.cli import main

FULL = {
    "synth": {"family": "blobs", "k": 3, "per_cluster": 30},
    "params": {"k": 3}, "stability": {"runs": 3}, "alternatives": {},
    "surrogate": {}, "shap": {}, "embedding": {"iters": 250}, "tuning": {"k_max": 5},
}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_run_full_pipeline(tmp_path):
    out = tmp_path / "out"
    assert main(["run", _write(tmp_path, FULL), "-o", str(out), "--threads", "2"]) == 0
    assert len(list(out.iterdir())) == 5


def test_run_flags_override(tmp_path):
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, {"synth": {"family": "blobs"}}), "-o", str(out),
                 "--seed", "3", "--format", "json"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["provenance"]["config"]["seed"] == 3
    assert not (out / "report.md").exists()


def test_kmedoids_exit_1(tmp_path, capsys):
    rc = main(["run", _write(tmp_path, {"synth": {"family": "blobs"}, "algorithm": "kmedoids"})])
    err = capsys.readouterr().err
    assert rc == 1 and "kmedoids" in err and "kmeans" in err and "gmm" in err


def test_unknown_key_and_bad_json_exit_1(tmp_path, capsys):
    assert main(["run", _write(tmp_path, {"synth": {"family": "blobs"}, "nope": 1})]) == 1
    assert "nope" in capsys.readouterr().err
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["run", str(p)]) == 1


def test_runtime_errors_exit_2(tmp_path, capsys):
    assert main(["run", _write(tmp_path, {"input": str(tmp_path / "missing.csv")})]) == 2
    assert "stage 'load'" in capsys.readouterr().err
    cfg = {"synth": {"family": "sequences", "per_cluster": 10}, "algorithm": "dbscan",
           "params": {"metric": "dtw", "band": 0, "eps": 1.0}}
    assert main(["run", _write(tmp_path, cfg), "-o", str(tmp_path / "x")]) == 2
    assert "stage 'distance'" in capsys.readouterr().err


def test_synth_trailing_cluster_column(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["synth", "blobs", "--k", "3", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[-1] == "cluster"
    assert len(lines) == 1 + 3 * 50


def test_validate_identical_columns(tmp_path, capsys):
    out = tmp_path / "b.csv"
    main(["synth", "blobs", "--k", "3", "--per-cluster", "10", "-o", str(out)])
    capsys.readouterr()
    assert main(["validate", str(out), "--labels", "cluster", "--truth", "cluster"]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores["ari"] == 1.0 and scores["nmi"] == 1.0


def test_explain_standalone(tmp_path):
    csv = tmp_path / "m.csv"
    main(["synth", "multistage", "--k", "2", "--per-cluster", "20", "--stages", "3", "-o", str(csv)])
    out = tmp_path / "ex"
    assert main(["explain", str(csv), "--labels", "cluster", "-o", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["surrogate"]["rules"] and rep["importance"]["ranking"]
    assert rep["stability"] == "not run" and rep["embedding"] == "not run"
    assert (out / "shap.csv").exists()


def test_usage_error_exit_1(capsys):
    assert main(["synth", "spirals", "-o", "x.csv"]) == 1
    assert main(["validate", "x.csv"]) == 1


def test_log_env(monkeypatch, tmp_path):
    monkeypatch.setenv("EXALT_LOG", "loud")
    assert main(["synth", "blobs", "-o", str(tmp_path / "a.csv")]) == 1
    monkeypatch.setenv("EXALT_LOG", "debug")
    assert main(["synth", "blobs", "-o", str(tmp_path / "a.csv")]) == 0


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "exalt", "synth", "blobs", "-o", str(tmp_path / "c.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
