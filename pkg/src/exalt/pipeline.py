"""Fixed-order orchestration of all stages for one configuration."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import clustering, dataset, embedding, robustness, shap, surrogate, tuning, validation
from .clustering import AlgorithmConfig
from .config import PipelineConfig
from .errors import DataError, StageError
from .report import Artifacts, Report, build_report, render

log = logging.getLogger("exalt")

# seed offsets per stage; toggling one stage never shifts another's randomness
SEED_OFFSETS = {"synth": 0, "tune": 1, "fit": 2, "stability": 3, "alternatives": 4,
                "surrogate": 5, "shap": 6, "embed": 7}

OUTPUT_FILES = {"json": "report.json", "markdown": "report.md", "embedding": "embedding.csv",
                "shap": "shap.csv", "stability": "stability.csv"}


class _stage:
    """Context manager turning library errors into StageError for ``name``."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, str(exc)) from exc
        return False


@dataclass
class RunResult:
    report: Report
    files: dict
    artifacts: Artifacts


def _synth(spec, seed) -> dataset.Dataset:
    if spec.family == "blobs":
        return dataset.gen_blobs(spec.k, spec.per_cluster, spec.d, spec.separation, seed)
    if spec.family == "sequences":
        return dataset.gen_event_sequences(spec.k, spec.per_cluster, spec.base_len, spec.noise, seed, spec.warp)
    return dataset.gen_multistage(spec.k, spec.per_cluster, spec.stages, seed, spec.walk_len, spec.chain)


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def _num(v) -> str:
    return repr(float(v))


def explain_labels(raw: dataset.Dataset, labels, spec, seed: int, model=None, model_ds=None):
    """Surrogate tree plus SHAP for an arbitrary labeling.

    Returns ``(tree, rules, fidelity, explanations, row_ids, shap_info)``;
    explanations are empty when ``spec.shap`` is None.
    """
    sur, shp = spec
    with _stage("surrogate"):
        tree = surrogate.tree_fit(raw, labels, sur.max_depth, sur.min_leaf)
        rules = surrogate.tree_rules(tree)
        fidelity = surrogate.tree_fidelity(tree, raw, labels)
    if shp is None:
        return tree, rules, fidelity, [], [], {}
    with _stage("shap"):
        rng = np.random.default_rng(seed)
        n = raw.n
        rows = np.arange(n)
        if shp.max_rows is not None and shp.max_rows < n:
            rows = np.sort(rng.choice(n, shp.max_rows, replace=False))
        labels = np.asarray(labels)
        info = {"method": shp.method, "model": shp.model, "explained_rows": int(rows.size)}
        if shp.method == "tree":
            expl = [shap.tree_shap(tree, raw.features[i], labels[i]) for i in rows]
        else:
            src = raw if shp.model == "surrogate" else model_ds
            bg_idx = np.sort(rng.choice(n, min(shp.background, n), replace=False))
            background = src.features[bg_idx]
            info["background_rows"] = int(bg_idx.size)
            expl = []
            for i in rows:
                if shp.model == "surrogate":
                    c = tree.class_index(labels[i])
                    f = lambda Z, c=c: surrogate.tree_predict(tree, Z)[1][:, c]
                else:
                    c = int(labels[i])
                    f = lambda Z, c=c: clustering.gmm_predict_proba(model, Z)[:, c]
                expl.append(shap.kernel_shap(f, background, src.features[i], shp.nsamples,
                                             seed, vectorized=True, explained_class=int(labels[i])))
    return tree, rules, fidelity, expl, [int(i) for i in rows], info


def write_outputs(report: Report, out_dir: Path, fmt: str, extra: dict[str, bytes]) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if fmt in ("json", "both"):
        (out_dir / OUTPUT_FILES["json"]).write_bytes(render(report, "json"))
        written["json"] = OUTPUT_FILES["json"]
    if fmt in ("markdown", "both"):
        (out_dir / OUTPUT_FILES["markdown"]).write_bytes(render(report, "markdown"))
        written["markdown"] = OUTPUT_FILES["markdown"]
    for key, data in extra.items():
        (out_dir / OUTPUT_FILES[key]).write_bytes(data)
        written[key] = OUTPUT_FILES[key]
    return written


def _shap_csv(expl, row_ids, names) -> bytes:
    rows = [(r, names[j], _num(e.phi[j])) for r, e in zip(row_ids, expl) for j in range(len(names))]
    return _csv_bytes(["row_id", "feature", "value"], rows)


def run_pipeline(cfg: PipelineConfig, out_dir=None, threads: int | None = None,
                 timestamp: str | None = None) -> RunResult:
    """Execute every configured stage and write the report files."""
    seed = cfg.seed
    stage_seed = {k: seed + v for k, v in SEED_OFFSETS.items()}
    out_dir = Path(out_dir or cfg.out_dir or "exalt_out")
    timestamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")

    with _stage("load"):
        if cfg.synth is not None:
            raw = _synth(cfg.synth, stage_seed["synth"])
        else:
            raw = dataset.load_csv(cfg.input, cfg.label_column)
    with _stage("standardize"):
        if cfg.standardize:
            ds, scaling = dataset.standardize(raw)
        else:
            ds, scaling = raw, None

    params = dict(cfg.params)
    algo = AlgorithmConfig(cfg.algorithm, params)
    dm = None
    if cfg.algorithm == "dbscan":
        with _stage("distance"):
            dm = clustering.distance_for(ds, algo, threads)

    curves, binding = None, None
    with _stage("tune"):
        if cfg.tuning is not None:
            t = cfg.tuning
            binding = t.binding
            if cfg.algorithm == "dbscan":
                kd = tuning.kdist_curve(dm, params["min_pts"])
                knee = tuning.knee_index(np.arange(kd.size), kd, side="below")
                curves = [tuning.TuningCurve("kdist", tuple(range(kd.size)), tuple(kd), knee)]
                if binding == "kdist":
                    params["eps"] = tuning.eps_from_kdist(dm, params["min_pts"])
            else:
                k_max = min(t.k_max, ds.n - 1)
                curves = [tuning.elbow_scan(ds, t.k_min, k_max, stage_seed["tune"]),
                          tuning.silhouette_scan(ds, max(2, t.k_min), k_max, stage_seed["tune"])]
                if binding in ("elbow", "silhouette"):
                    chosen = curves[0] if binding == "elbow" else curves[1]
                    params["k"] = int(chosen.selected_value)
        if cfg.algorithm == "dbscan" and params["eps"] == "auto":
            params["eps"] = tuning.eps_from_kdist(dm, params["min_pts"])
    algo = AlgorithmConfig(cfg.algorithm, params)

    info = {}
    model = None
    with _stage("fit"):
        fs = stage_seed["fit"]
        if cfg.algorithm == "kmeans":
            model, labels = clustering.kmeans_fit(ds, params["k"], params["max_iter"], params["restarts"], fs, threads)
            info = {"inertia": model.inertia, "iterations": model.iterations}
        elif cfg.algorithm == "gmm":
            model, labels, _ = clustering.gmm_fit(ds, params["k"], params["max_iter"], params["tol"], fs)
            info = {"loglik": model.loglik_trace[-1], "em_iterations": len(model.loglik_trace),
                    "converged": model.converged, "weights": model.weights}
        else:
            labels = clustering.dbscan_fit(dm, clustering.DbscanParams(params["eps"], params["min_pts"]))
            info = {"n_noise": int(np.sum(labels == clustering.NOISE))}

    with _stage("validate"):
        scores = validation.validate(ds, labels, raw.truth, dm)

    extra: dict[str, bytes] = {}
    stab = None
    if cfg.stability is not None:
        with _stage("stability"):
            s = cfg.stability
            stab = robustness.stability_analysis(ds, algo, s.runs, s.noise_scale, stage_seed["stability"],
                                                 s.threshold, algo_seed=stage_seed["fit"], threads=threads)
            extra["stability"] = _csv_bytes(
                ["row_id", "cluster", "stability"],
                [(i, int(labels[i]), _num(stab.per_point[i])) for i in range(ds.n)])

    alts = None
    if cfg.alternatives is not None:
        with _stage("alternatives"):
            alts = robustness.alternatives(ds, labels, algo, cfg.alternatives.count,
                                           stage_seed["alternatives"], dm=dm)

    tree = rules = fidelity = importance = top = None
    shap_info = {}
    if cfg.surrogate is not None:
        tree, rules, fidelity, expl, row_ids, shap_info = explain_labels(
            raw, labels, (cfg.surrogate, cfg.shap), stage_seed["shap"], model, ds)
        if expl:
            importance = shap.global_importance(expl)
            top = shap.per_class_top(expl, 3)
            extra["shap"] = _shap_csv(expl, row_ids, raw.feature_names)

    emb = None
    if cfg.embedding is not None:
        with _stage("embed"):
            e = cfg.embedding
            if e.method == "tsne":
                perp = min(e.perplexity, (ds.n - 1) / 3)
                emb = embedding.tsne(ds, perp, e.iters, stage_seed["embed"])
            else:
                emb = embedding.pca2d(ds)
            rows = []
            for i in range(ds.n):
                truth = "" if raw.truth is None else int(raw.truth[i])
                rows.append((i, _num(emb.coords[i, 0]), _num(emb.coords[i, 1]), int(labels[i]), truth))
            extra["embedding"] = _csv_bytes(["row_id", "x", "y", "cluster", "truth"], rows)

    files = {k: OUTPUT_FILES[k] for k in extra}
    if cfg.format in ("json", "both"):
        files["json"] = OUTPUT_FILES["json"]
    if cfg.format in ("markdown", "both"):
        files["markdown"] = OUTPUT_FILES["markdown"]
    with _stage("report"):
        art = Artifacts(
            dataset=raw, labels=labels, validation=scores, algorithm=algo, algorithm_info=info,
            seed=seed, scaling=scaling, tuning=curves, tuning_binding=binding, stability=stab,
            alternatives=alts, tree=tree, rules=rules, fidelity=fidelity, importance=importance,
            per_cluster_top=top, shap_info=shap_info, embedding=emb, files=files,
            config=cfg.hashable(), timestamp=timestamp,
        )
        report = build_report(art)
        written = write_outputs(report, out_dir, cfg.format, extra)
    return RunResult(report, {k: out_dir / v for k, v in written.items()}, art)


def run_explain(raw: dataset.Dataset, labels, label_column: str, max_depth: int, min_leaf,
                shap_spec, seed: int, out_dir, fmt: str = "both", timestamp: str | None = None) -> RunResult:
    """Surrogate + SHAP for externally supplied labels (no clustering)."""
    from .config import SurrogateSpec

    timestamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    labels = np.asarray(labels, dtype=np.int64)
    with _stage("validate"):
        scores = validation.validate(raw, labels, raw.truth)
    sur = SurrogateSpec(max_depth=max_depth, min_leaf=min_leaf)
    tree, rules, fidelity, expl, row_ids, shap_info = explain_labels(raw, labels, (sur, shap_spec), seed)
    extra = {}
    importance = top = None
    if expl:
        importance = shap.global_importance(expl)
        top = shap.per_class_top(expl, 3)
        extra["shap"] = _shap_csv(expl, row_ids, raw.feature_names)
    config = {"mode": "explain", "label_column": label_column, "surrogate": sur.model_dump(),
              "shap": None if shap_spec is None else shap_spec.model_dump(), "seed": seed}
    files = {k: OUTPUT_FILES[k] for k in extra}
    if fmt in ("json", "both"):
        files["json"] = OUTPUT_FILES["json"]
    if fmt in ("markdown", "both"):
        files["markdown"] = OUTPUT_FILES["markdown"]
    with _stage("report"):
        art = Artifacts(dataset=raw, labels=labels, validation=scores,
                        algorithm_info={"label_column": label_column}, seed=seed, tree=tree, rules=rules,
                        fidelity=fidelity, importance=importance, per_cluster_top=top, shap_info=shap_info,
                        files=files, config=config, timestamp=timestamp)
        report = build_report(art)
        written = write_outputs(report, Path(out_dir), fmt, extra)
    return RunResult(report, {k: Path(out_dir) / v for k, v in written.items()}, art)
