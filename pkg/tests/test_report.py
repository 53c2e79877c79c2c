import json
import re

import numpy as np
import pytest

from exalt.config import parse_config
from exalt.pipeline import run_pipeline
from exalt.report import NOT_RUN, SECTIONS, Report, parse_json, render

FULL = {
    "synth": {"family": "blobs", "k": 3, "per_cluster": 30, "separation": 10},
    "algorithm": "kmeans", "params": {"k": 3},
    "tuning": {"k_min": 2, "k_max": 5},
    "stability": {"runs": 3}, "alternatives": {"count": 2},
    "surrogate": {"max_depth": 3}, "shap": {},
    "embedding": {"method": "tsne", "iters": 300}, "seed": 5,
}


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    return run_pipeline(parse_config(FULL), out_dir=out, timestamp="T0"), out


def test_all_sections_populated(full_run):
    res, _ = full_run
    assert res.report.populated() == list(SECTIONS)


def test_clustering_only_marks_not_run(tmp_path):
    cfg = parse_config({"synth": {"family": "blobs", "per_cluster": 20}, "params": {"k": 3}})
    rep = run_pipeline(cfg, out_dir=tmp_path, timestamp="T").report
    assert rep.validation != NOT_RUN
    for s in ("stability", "surrogate", "importance", "embedding", "tuning", "alternatives"):
        assert getattr(rep, s) == NOT_RUN
    assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json", "report.md"]


def test_json_round_trip(full_run):
    res, _ = full_run
    data = render(res.report, "json")
    back = parse_json(data)
    assert back == res.report
    assert render(back, "json") == data


def test_report_numbers_come_from_artifacts(full_run):
    res, _ = full_run
    a = res.artifacts
    assert res.report.validation["silhouette"] == a.validation.silhouette
    assert res.report.surrogate["fidelity"] == a.fidelity
    assert res.report.stability["global_stability"] == a.stability.global_stability
    assert res.report.embedding["trustworthiness"] == a.embedding.quality


def test_markdown_rule_lines_and_precision(full_run):
    res, _ = full_run
    md = render(res.report, "markdown").decode()
    rule_lines = [l for l in md.splitlines() if l.startswith("- IF ")]
    assert len(rule_lines) == res.report.surrogate["n_leaves"]
    sil = res.report.validation["silhouette"]
    assert f"| silhouette | {sil:.4g} |" in md
    assert repr(sil) in render(res.report, "json").decode()
    heads = [l for l in md.splitlines() if l.startswith("## ")]
    assert heads[:3] == ["## Summary", "## Scores", "## Surrogate rules"]


def test_output_files(full_run):
    res, out = full_run
    assert sorted(p.name for p in out.iterdir()) == sorted(
        ["report.json", "report.md", "embedding.csv", "shap.csv", "stability.csv"])
    shap_lines = (out / "shap.csv").read_text().splitlines()
    assert shap_lines[0] == "row_id,feature,value"
    assert len(shap_lines) == 1 + 90 * 2
    emb = (out / "embedding.csv").read_text().splitlines()
    assert emb[0] == "row_id,x,y,cluster,truth" and len(emb) == 91


def test_rerun_byte_identical(full_run, tmp_path):
    res, _ = full_run
    again = run_pipeline(parse_config(FULL), out_dir=tmp_path, timestamp="T0")
    assert render(again.report, "json") == render(res.report, "json")


def test_from_dict_rejects_unknown_keys(full_run):
    res, _ = full_run
    d = res.report.to_dict()
    d["extra"] = 1
    with pytest.raises(ValueError):
        Report.from_dict(d)


def test_provenance(full_run):
    p = full_run[0].report.provenance
    assert re.fullmatch(r"[0-9a-f]{64}", p["config_hash"])
    assert p["config"]["seed"] == 5 and p["timestamp"] == "T0"
