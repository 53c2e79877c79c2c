"""Assemble pipeline artifacts into one explanation report (JSON / Markdown)."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from ._version import __version__
from .clustering import AlgorithmConfig
from .dataset import Dataset, ScalingParams
from .embedding import Embedding2D
from .errors import DataError
from .robustness import AlternativeSet, StabilityReport
from .shap import GlobalImportance
from .surrogate import Rule, SurrogateTree
from .tuning import TuningCurve
from .validation import ValidationScores

NOT_RUN = "not run"
SECTIONS = ("dataset", "algorithm", "tuning", "validation", "stability", "alternatives",
            "surrogate", "importance", "embedding")

CONVENTIONS = {
    "shap_target": "SHAP explains the surrogate tree's class probability for each row's own cluster "
                   "(kernel mode may explain the mixture posterior instead)",
    "nmi_normalization": "geometric mean of entropies (natural log)",
    "noise_handling": "NOISE excluded from internal indices, kept as its own label for ARI/NMI",
    "silhouette_singletons": "s(i) = 0 for singleton clusters",
    "dbscan_eps_auto": "eps = k-distance at the largest dip below the chord of the sorted "
                       "k-distance curve (curve maximum when there is no dip)",
    "kmeans_init": "k-means++ seeding, Lloyd then single-point transfer refinement, best of "
                   "restarts by inertia, empty clusters reseeded at the farthest point",
}


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def config_hash(config: dict) -> str:
    canon = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class Report:
    dataset: Any
    algorithm: Any
    tuning: Any
    validation: Any
    stability: Any
    alternatives: Any
    surrogate: Any
    importance: Any
    embedding: Any
    provenance: dict

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        names = {f.name for f in fields(cls)}
        if set(data) != names:
            raise DataError(f"report keys {sorted(data)} do not match {sorted(names)}")
        return cls(**data)

    def populated(self) -> list[str]:
        return [s for s in SECTIONS if getattr(self, s) != NOT_RUN]


@dataclass
class Artifacts:
    """Everything a pipeline run produced; optional stages may be None."""

    dataset: Dataset
    labels: np.ndarray
    validation: ValidationScores
    algorithm: AlgorithmConfig | None = None
    algorithm_info: dict = field(default_factory=dict)
    seed: int | None = None
    scaling: ScalingParams | None = None
    tuning: list[TuningCurve] | None = None
    tuning_binding: str | None = None
    stability: StabilityReport | None = None
    alternatives: AlternativeSet | None = None
    tree: SurrogateTree | None = None
    rules: list[Rule] | None = None
    fidelity: float | None = None
    importance: GlobalImportance | None = None
    per_cluster_top: dict | None = None
    shap_info: dict = field(default_factory=dict)
    embedding: Embedding2D | None = None
    files: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    timestamp: str = ""


def _section(value, builder):
    return NOT_RUN if value is None else builder(value)


def build_report(a: Artifacts) -> Report:
    """Serialize artifacts; every number is copied from its source object."""
    if a.labels is None or a.validation is None:
        raise DataError("a report needs at least a labeling and validation scores")
    ds = a.dataset
    names = list(ds.feature_names)
    labels = np.asarray(a.labels)
    ids, counts = np.unique(labels, return_counts=True)

    dataset = {
        "n": ds.n,
        "d": ds.d,
        "feature_names": names,
        "has_truth": ds.truth is not None,
        "has_sequences": ds.sequences is not None,
        "standardized": a.scaling is not None,
    }
    if a.scaling is not None:
        dataset["scaling"] = {"mean": a.scaling.mean, "std": a.scaling.std,
                              "constant_features": [names[j] for j, c in enumerate(a.scaling.constant) if c]}

    algorithm = {
        "name": a.algorithm.name if a.algorithm else "external labels",
        "params": dict(a.algorithm.params) if a.algorithm else {},
        "seed": a.seed,
        "cluster_sizes": {int(i): int(c) for i, c in zip(ids, counts)},
        **a.algorithm_info,
    }

    def tuning(curves):
        return {"binding": a.tuning_binding, "curves": [c.to_dict() for c in curves]}

    def surrogate(tree):
        rules = a.rules or []
        return {
            "fidelity": a.fidelity,
            "depth": tree.depth(),
            "n_leaves": len(tree.leaves),
            "max_depth": tree.max_depth,
            "min_leaf": tree.min_leaf,
            "rules": [r.to_dict(names) for r in rules],
            "tree": tree.to_dict(),
        }

    def importance(gi):
        out = gi.to_dict(names)
        out["per_cluster_top3"] = {str(c): [names[j] for j in top]
                                   for c, top in (a.per_cluster_top or {}).items()}
        out.update(a.shap_info)
        return out

    def embedding(emb):
        return {**emb.to_dict(), "file": a.files.get("embedding")}

    def stability(st):
        return {**st.to_dict(), "file": a.files.get("stability")}

    provenance = {
        "tool": "exalt",
        "version": __version__,
        "config_hash": config_hash(a.config),
        "config": a.config,
        "files": dict(sorted(a.files.items())),
        "conventions": CONVENTIONS,
        "timestamp": a.timestamp,
    }
    raw = Report(
        dataset=dataset,
        algorithm=algorithm,
        tuning=_section(a.tuning, tuning),
        validation=a.validation.to_dict(),
        stability=_section(a.stability, stability),
        alternatives=_section(a.alternatives, lambda s: s.to_dict()),
        surrogate=_section(a.tree, surrogate),
        importance=_section(a.importance, importance),
        embedding=_section(a.embedding, embedding),
        provenance=provenance,
    )
    return Report.from_dict(to_jsonable(raw.to_dict()))


# --------------------------------------------------------------------------
# rendering


def _g(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _rule_line(rule: dict) -> str:
    parts = []
    for c in rule["conditions"]:
        lo, hi, name = c["low"], c["high"], c["name"]
        if lo is None:
            parts.append(f"{name} <= {_g(hi)}")
        elif hi is None:
            parts.append(f"{name} > {_g(lo)}")
        else:
            parts.append(f"{_g(lo)} < {name} <= {_g(hi)}")
    cond = " AND ".join(parts) if parts else "TRUE"
    return (f"- IF {cond} THEN cluster {rule['label']} "
            f"(confidence {_g(rule['confidence'])}, cover {rule['cover']})")


def _markdown(r: Report) -> str:
    out = ["# Clustering explanation report", ""]
    d, alg = r.dataset, r.algorithm
    out += ["## Summary", "",
            f"- rows: {d['n']}, features: {d['d']} ({', '.join(d['feature_names'])})",
            f"- standardized: {d['standardized']}",
            f"- algorithm: {alg['name']} {json.dumps(alg['params'], sort_keys=True)}",
            f"- seed: {_g(alg['seed'])}",
            f"- cluster sizes: " + ", ".join(f"{k}: {v}" for k, v in alg["cluster_sizes"].items()),
            ""]
    v = r.validation
    out += ["## Scores", "", "| index | value |", "|---|---|"]
    for key in ("silhouette", "davies_bouldin", "calinski_harabasz", "ari", "nmi"):
        out.append(f"| {key} | {_g(v[key])} |")
    out += [f"| noise excluded | {v['n_noise_excluded']} |", ""]
    for note in v["notes"]:
        out.append(f"- note: {note}")

    out += ["## Surrogate rules", ""]
    if r.surrogate == NOT_RUN:
        out += [NOT_RUN, ""]
    else:
        s = r.surrogate
        out += [f"Fidelity {_g(s['fidelity'])}, depth {s['depth']}, {s['n_leaves']} leaves "
                f"(max_depth {s['max_depth']}, min_leaf {s['min_leaf']}).", ""]
        out += [_rule_line(rule) for rule in s["rules"]]
        out.append("")

    out += ["## Feature importance (mean |SHAP|)", ""]
    if r.importance == NOT_RUN:
        out += [NOT_RUN, ""]
    else:
        imp = r.importance
        for name in imp["ranking"]:
            out.append(f"- {name}: {_g(imp['mean_abs_phi'][name])}")
        out.append("")
        for c, top in imp["per_cluster_top3"].items():
            out.append(f"- cluster {c} top features: {', '.join(top)}")
        out.append("")

    out += ["## Stability", ""]
    if r.stability == NOT_RUN:
        out += [NOT_RUN, ""]
    else:
        st = r.stability
        out += [f"- global stability (mean pairwise ARI): {_g(st['global_stability'])}",
                f"- runs: {st['runs']}, noise scale: {_g(st['noise_scale'])}",
                f"- fragile points (< {_g(st['fragile_threshold'])}): {st['n_fragile']}",
                ""]

    out += ["## Alternatives", ""]
    if r.alternatives == NOT_RUN:
        out += [NOT_RUN, ""]
    else:
        al = r.alternatives
        out.append(f"Incumbent quality (silhouette): {_g(al['incumbent_quality'])}; pool {al['pool_size']}.")
        out.append("")
        if al["empty"]:
            out += [f"- {al['message']}", ""]
        else:
            out += ["| # | quality | diversity | clusters | provenance |", "|---|---|---|---|---|"]
            for i, e in enumerate(al["entries"]):
                prov = ", ".join(f"{k}={_g(val)}" for k, val in e["provenance"].items())
                out.append(f"| {i + 1} | {_g(e['quality'])} | {_g(e['diversity'])} | {e['n_clusters']} | {prov} |")
            out.append("")

    out += ["## Tuning", ""]
    if r.tuning == NOT_RUN:
        out += [NOT_RUN, ""]
    else:
        out.append(f"Binding criterion: {r.tuning['binding']}")
        out.append("")
        for c in r.tuning["curves"]:
            pairs = ", ".join(f"{_g(x)}: {_g(y)}" for x, y in zip(c["values"], c["scores"]))
            out.append(f"- {c['method']} (selected {_g(c['selected_value'])}): {pairs}")
        out.append("")

    out += ["## Embedding", ""]
    if r.embedding == NOT_RUN:
        out += [NOT_RUN, ""]
    else:
        e = r.embedding
        out += [f"- method: {e['method']}, trustworthiness: {_g(e['trustworthiness'])}",
                f"- file: {e['file']}", ""]

    p = r.provenance
    out += ["## Provenance", "",
            f"- {p['tool']} {p['version']}, config hash `{p['config_hash']}`",
            f"- generated: {p['timestamp']}", ""]
    for k, val in p["conventions"].items():
        out.append(f"- {k}: {val}")
    out.append("")
    return "\n".join(out)


def render(report: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n").encode()
    if fmt == "markdown":
        return _markdown(report).encode()
    raise DataError(f"unknown format {fmt!r}; expected json or markdown")


def parse_json(data: bytes | str) -> Report:
    return Report.from_dict(json.loads(data))
