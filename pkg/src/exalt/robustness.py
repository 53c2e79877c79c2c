"""Perturbation stability and alternative clusterings."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clustering import NOISE, AlgorithmConfig, cluster, distance_for, n_clusters
from .dataset import Dataset
from .errors import DataError
from .validation import adjusted_rand, silhouette

FRAGILE_THRESHOLD = 0.5


def perturb(ds: Dataset, noise_scale: float, seed: int) -> Dataset:
    """Add Gaussian noise with sigma = noise_scale * per-feature std.

    Raw sequences, when present, receive noise scaled by the pooled std of
    all sequence values.
    """
    if noise_scale < 0:
        raise DataError("noise_scale must be >= 0")
    if noise_scale == 0:
        return ds
    rng = np.random.default_rng(seed)
    X = ds.features
    sigma = noise_scale * X.std(axis=0)
    Xp = X + rng.standard_normal(X.shape) * sigma
    seqs = ds.sequences
    if seqs is not None:
        pooled = float(np.concatenate(seqs).std())
        seqs = tuple(s + rng.standard_normal(s.size) * noise_scale * pooled for s in seqs)
    return ds.replace(features=Xp, sequences=seqs)


@dataclass(frozen=True, eq=False)
class StabilityReport:
    global_stability: float
    per_point: np.ndarray
    runs: int
    noise_scale: float
    threshold: float
    fragile_points: tuple[int, ...]
    pairwise_ari: tuple[float, ...] = ()
    reference: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "global_stability": float(self.global_stability),
            "global_stability_display": max(0.0, float(self.global_stability)),
            "runs": self.runs,
            "noise_scale": float(self.noise_scale),
            "fragile_threshold": float(self.threshold),
            "fragile_points": list(self.fragile_points),
            "n_fragile": len(self.fragile_points),
            "per_point_mean": float(np.mean(self.per_point)),
            "per_point_min": float(np.min(self.per_point)),
        }


def _comembership(labels):
    labels = np.asarray(labels)
    M = (labels[:, None] == labels[None, :]) & (labels[:, None] != NOISE)
    np.fill_diagonal(M, False)
    return M


def cocluster_jaccard(ref, other) -> np.ndarray:
    """Per-point Jaccard similarity of co-cluster sets (self excluded).

    NOISE points have an empty co-cluster set; two empty sets score 1.
    """
    A = _comembership(ref)
    B = _comembership(other)
    inter = (A & B).sum(axis=1)
    union = (A | B).sum(axis=1)
    out = np.ones(len(inter))
    nz = union > 0
    out[nz] = inter[nz] / union[nz]
    return out


def stability_analysis(ds: Dataset, algo_config: AlgorithmConfig, runs: int = 20,
                       noise_scale: float = 0.05, seed: int = 0,
                       threshold: float = FRAGILE_THRESHOLD, algo_seed: int | None = None,
                       threads: int | None = None) -> StabilityReport:
    """Re-cluster ``runs`` independently perturbed copies of ``ds``.

    Every fit uses the same algorithm seed (``algo_seed``, default ``seed``),
    so the perturbation is the only source of variation. Run ``r`` perturbs
    with child ``r`` of ``SeedSequence(seed)``; aggregation follows run order.
    """
    if runs < 2:
        raise DataError("stability_analysis needs runs >= 2")
    if algo_seed is None:
        algo_seed = seed
    reference = cluster(ds, algo_config, algo_seed)
    children = np.random.SeedSequence(seed).spawn(runs)

    def one(ss):
        pseed = int(ss.generate_state(1)[0])
        return cluster(perturb(ds, noise_scale, pseed), algo_config, algo_seed)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            labelings = list(ex.map(one, children))
    else:
        labelings = [one(ss) for ss in children]
    aris = tuple(adjusted_rand(a, b) for a, b in itertools.combinations(labelings, 2))
    per_point = np.mean([cocluster_jaccard(reference, lab) for lab in labelings], axis=0)
    fragile = tuple(int(i) for i in np.flatnonzero(per_point < threshold))
    return StabilityReport(float(np.mean(aris)), per_point, runs, float(noise_scale),
                           float(threshold), fragile, aris, reference)


# --------------------------------------------------------------------------
# alternatives


@dataclass(frozen=True, eq=False)
class Alternative:
    labels: np.ndarray
    quality: float
    diversity: float
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "quality": float(self.quality),
            "diversity": float(self.diversity),
            "n_clusters": n_clusters(self.labels),
            "provenance": dict(self.provenance),
        }


@dataclass(frozen=True, eq=False)
class AlternativeSet:
    entries: tuple[Alternative, ...]
    incumbent_quality: float | None
    pool_size: int
    empty: bool = False
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "incumbent_quality": self.incumbent_quality,
            "pool_size": self.pool_size,
            "empty": self.empty,
            "message": self.message,
            "entries": [e.to_dict() for e in self.entries],
        }


UNIQUE_TOL = 1e-12


def _candidate_configs(config: AlgorithmConfig, incumbent_k: int, n: int, seeds):
    if config.name in ("kmeans", "gmm"):
        lo, hi = max(2, incumbent_k - 2), min(n - 1, incumbent_k + 2)
        for k in range(lo, hi + 1):
            for s in seeds:
                yield config.with_params(k=k), s, {"k": k, "seed": s}
    else:
        # DBSCAN is deterministic: seeds do not change the result
        eps = float(config.params["eps"])
        for f in (0.5, 0.75, 1.0, 1.25, 1.5):
            yield config.with_params(eps=eps * f), seeds[0], {"eps": eps * f, "eps_factor": f}


def pareto_front(points) -> list[int]:
    """Indices of points not dominated in (quality, diversity), both maximised."""
    pts = list(points)
    front = []
    for i, (q, v) in enumerate(pts):
        dominated = any((q2 >= q and v2 >= v) and (q2 > q or v2 > v) for q2, v2 in pts)
        if not dominated:
            front.append(i)
    return front


def alternatives(ds: Dataset, incumbent, algo_config: AlgorithmConfig, count: int = 5,
                 seed: int = 0, dm=None, n_seeds: int = 3) -> AlternativeSet:
    """Ranked alternative labelings on the quality/diversity Pareto front.

    Quality is the silhouette (on ``dm`` if given, else the distance implied
    by ``algo_config``); diversity is ``1 - ARI`` against the incumbent.
    """
    incumbent = np.asarray(incumbent, dtype=np.int64)
    if incumbent.shape[0] != ds.n:
        raise DataError("incumbent labeling length differs from dataset")
    if dm is None:
        dm = distance_for(ds, algo_config)
    try:
        inc_quality = silhouette(dm, incumbent)[0]
    except DataError:
        inc_quality = None
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(n_seeds)]
    kept_labels = [incumbent]
    pool = []
    for cfg, s, prov in _candidate_configs(algo_config, max(2, n_clusters(incumbent)), ds.n, seeds):
        labels = cluster(ds, cfg, s, dm=dm if cfg.name == "dbscan" else None)
        if any(abs(adjusted_rand(labels, kl) - 1.0) <= UNIQUE_TOL for kl in kept_labels):
            continue
        try:
            q = silhouette(dm, labels)[0]
        except DataError:
            continue
        kept_labels.append(labels)
        prov = {"algorithm": cfg.name, **prov}
        pool.append(Alternative(labels, q, 1.0 - adjusted_rand(labels, incumbent), prov))
    if not pool:
        return AlternativeSet((), inc_quality, 0, True, "no distinct valid candidates after deduplication")
    front = pareto_front([(a.quality, a.diversity) for a in pool])
    by_quality = lambda i: (-pool[i].quality, i)
    chosen = sorted(front, key=by_quality)[:count]
    if len(chosen) < count:
        rest = sorted((i for i in range(len(pool)) if i not in front), key=by_quality)
        chosen += rest[: count - len(chosen)]
    chosen.sort(key=by_quality)
    return AlternativeSet(tuple(pool[i] for i in chosen), inc_quality, len(pool))
