"""K-Means, DBSCAN and diagonal-covariance Gaussian mixtures."""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import logsumexp

from .dataset import Dataset, as_matrix
from .distance import check_distance_matrix, pairwise
from .errors import ConfigError, DataError

NOISE = -1
VARIANCE_FLOOR = 1e-6
ALGORITHMS = ("kmeans", "dbscan", "gmm")


def canonical_labels(labels) -> np.ndarray:
    """Rename non-noise labels to 0..k-1 in order of first appearance."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full(labels.shape, NOISE, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        if lab != NOISE:
            out[i] = mapping.setdefault(int(lab), len(mapping))
    return out


def n_clusters(labels) -> int:
    labels = np.asarray(labels)
    return int(np.unique(labels[labels != NOISE]).size)


# --------------------------------------------------------------------------
# K-Means


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centroids: np.ndarray
    inertia: float
    iterations: int
    seed: int
    inertia_trace: tuple[float, ...] = ()
    seeding_inertia: float = math.nan

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(X, C):
    return np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=-1)


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    C = np.empty((k, X.shape[1]))
    C[0] = X[rng.integers(n)]
    d2 = np.sum((X - C[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        C[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - C[c]) ** 2, axis=1))
    return C


def _lloyd(X, k, max_iter, rng):
    C = _kmeanspp(X, k, rng)
    d2 = _sq_dists(X, C)
    assign = np.argmin(d2, axis=1)
    trace = [float(d2[np.arange(len(X)), assign].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        for c in range(k):
            members = assign == c
            if members.any():
                C[c] = X[members].mean(axis=0)
        own = np.sum((X - C[assign]) ** 2, axis=1)
        # reseed empty clusters at the point farthest from its own centroid
        for c in range(k):
            if not np.any(assign == c):
                far = int(np.argmax(own))
                C[c] = X[far]
                assign[far] = c
                own[far] = 0.0
        d2 = _sq_dists(X, C)
        new = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(len(X)), new].sum()))
        if np.array_equal(new, assign):
            break
        assign = new
    # centroids consistent with the final assignment
    for c in range(k):
        members = assign == c
        if members.any():
            C[c] = X[members].mean(axis=0)
    trace.append(float(np.sum((X - C[assign]) ** 2)))
    assign, C = _transfer_refine(X, assign, C)
    inertia = float(np.sum((X - C[assign]) ** 2))
    trace.append(inertia)
    return C, assign, inertia, it, trace


def _transfer_refine(X, assign, C, rel_tol=1e-12):
    """Single-point transfers (Hartigan) from a Lloyd fixpoint.

    Moving x from cluster a to b changes inertia by
    ``n_b/(n_b+1) |x-c_b|^2 - n_a/(n_a-1) |x-c_a|^2``; points are moved in
    index order while some move strictly lowers inertia. The result is
    still a Lloyd fixpoint, with inertia no higher than the input.
    """
    k = C.shape[0]
    if k < 2:
        return assign, C
    assign = assign.copy()
    C = C.copy()
    cnt = np.bincount(assign, minlength=k).astype(float)

    def move_costs(i):
        d2 = np.sum((C - X[i]) ** 2, axis=1)
        a = assign[i]
        leave = cnt[a] / (cnt[a] - 1) * d2[a] if cnt[a] > 1 else -np.inf
        join = cnt / (cnt + 1) * d2
        join[a] = np.inf
        return leave, join

    # cheap vectorised check first: most Lloyd fixpoints admit no move
    d2 = _sq_dists(X, C)
    own = d2[np.arange(len(X)), assign]
    n_own = cnt[assign]
    leave = np.full(len(X), -np.inf)
    multi = n_own > 1
    leave[multi] = n_own[multi] / (n_own[multi] - 1) * own[multi]
    join = cnt[None, :] / (cnt[None, :] + 1) * d2
    join[np.arange(len(X)), assign] = np.inf
    if not np.any(join.min(axis=1) < leave - rel_tol * np.maximum(1.0, leave)):
        return assign, C

    moved = True
    while moved:
        moved = False
        for i in range(X.shape[0]):
            lv, jn = move_costs(i)
            b = int(np.argmin(jn))
            if jn[b] < lv - rel_tol * max(1.0, lv):
                a = assign[i]
                C[a] = (C[a] * cnt[a] - X[i]) / (cnt[a] - 1)
                C[b] = (C[b] * cnt[b] + X[i]) / (cnt[b] + 1)
                cnt[a] -= 1
                cnt[b] += 1
                assign[i] = b
                moved = True
    # recompute centroids exactly to shed incremental rounding
    for c in range(k):
        C[c] = X[assign == c].mean(axis=0)
    return assign, C


def kmeans_fit(ds, k: int, max_iter: int = 300, restarts: int = 8, seed: int = 0,
               threads: int | None = None) -> tuple[KMeansModel, np.ndarray]:
    """Best-of-``restarts`` Lloyd iterations from k-means++ seeding.

    Each restart's Lloyd fixpoint is polished by single-point transfers,
    which can only lower inertia.

    Restart ``r`` draws from child ``r`` of ``SeedSequence(seed)``, so the
    selected run does not depend on ``threads``. Ties in inertia go to the
    lowest restart index.
    """
    X = as_matrix(ds)
    n = X.shape[0]
    if k < 1:
        raise DataError("k must be >= 1")
    if k > n:
        raise DataError(f"k={k} exceeds n={n}")
    if restarts < 1 or max_iter < 1:
        raise DataError("restarts and max_iter must be >= 1")
    children = np.random.SeedSequence(seed).spawn(restarts)

    def one(ss):
        return _lloyd(X, k, max_iter, np.random.default_rng(ss))

    if threads is not None and threads > 1 and restarts > 1:
        with ThreadPoolExecutor(threads) as ex:
            runs = list(ex.map(one, children))
    else:
        runs = [one(ss) for ss in children]
    best = min(range(restarts), key=lambda r: (runs[r][2], r))
    C, assign, inertia, it, trace = runs[best]
    model = KMeansModel(C, inertia, it, seed, tuple(trace), trace[0])
    return model, assign.astype(np.int64)


def kmeans_predict(model: KMeansModel, points) -> np.ndarray:
    P = as_matrix(points)
    if P.shape[1] != model.centroids.shape[1]:
        raise DataError(f"points have dimension {P.shape[1]}, model has {model.centroids.shape[1]}")
    return np.argmin(_sq_dists(P, model.centroids), axis=1).astype(np.int64)


# --------------------------------------------------------------------------
# DBSCAN


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise DataError(f"eps must be > 0, got {self.eps}")
        if self.min_pts < 1:
            raise DataError(f"min_pts must be >= 1, got {self.min_pts}")


def dbscan_fit(dm, params: DbscanParams) -> np.ndarray:
    """Density clustering on a precomputed distance matrix.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters are grown from core points taken in ascending
    index order. A border point joins the cluster of its nearest core
    neighbour (ties: the cluster discovered first), which makes the result
    independent of row order up to renaming.
    """
    D = check_distance_matrix(dm)
    n = D.shape[0]
    within = D <= params.eps
    core = within.sum(axis=1) >= params.min_pts
    labels = np.full(n, NOISE, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in np.flatnonzero(within[p] & core):
                if labels[q] == NOISE:
                    labels[q] = cluster
                    queue.append(q)
        cluster += 1
    for i in np.flatnonzero(~core):
        nbrs = np.flatnonzero(within[i] & core)
        if nbrs.size:
            d = D[i, nbrs]
            closest = nbrs[d == d.min()]
            labels[i] = labels[closest].min()
    return labels


# --------------------------------------------------------------------------
# Gaussian mixture


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    loglik_trace: tuple[float, ...]
    converged: bool = False

    @property
    def k(self) -> int:
        return self.weights.shape[0]


def _log_joint(X, weights, means, variances):
    # log w_c + log N(x | mu_c, diag var_c), shape (n, k)
    d = X.shape[1]
    diff2 = (X[:, None, :] - means[None, :, :]) ** 2 / variances[None, :, :]
    logdet = np.sum(np.log(variances), axis=1)
    return (np.log(weights)[None, :]
            - 0.5 * (d * math.log(2 * math.pi) + logdet[None, :] + diff2.sum(axis=-1)))


def _e_step(X, weights, means, variances):
    lj = _log_joint(X, weights, means, variances)
    lse = logsumexp(lj, axis=1)
    resp = np.exp(lj - lse[:, None])
    resp /= resp.sum(axis=1, keepdims=True)
    return resp, float(lse.sum())


def _m_step(X, resp):
    nk = resp.sum(axis=0)
    nk = np.maximum(nk, 10 * np.finfo(float).tiny)
    weights = nk / nk.sum()
    means = (resp.T @ X) / nk[:, None]
    var = np.einsum("nk,nkd->kd", resp, (X[:, None, :] - means[None, :, :]) ** 2) / nk[:, None]
    return weights, means, np.maximum(var, 0.0) + VARIANCE_FLOOR


def gmm_fit(ds, k: int, max_iter: int = 300, tol: float = 1e-6, seed: int = 0,
            restarts: int = 1) -> tuple[GmmModel, np.ndarray, np.ndarray]:
    """EM for a diagonal-covariance mixture, initialised from k-means.

    Returns the model, hard labels (argmax responsibility) and the n x k
    responsibility matrix.
    """
    X = as_matrix(ds)
    n = X.shape[0]
    if k < 1 or k > n:
        raise DataError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    km, assign = kmeans_fit(X, k, max_iter=max_iter, restarts=restarts, seed=seed)
    resp = np.zeros((n, k))
    resp[np.arange(n), assign] = 1.0
    weights, means, variances = _m_step(X, resp)
    trace = []
    converged = False
    for _ in range(max_iter):
        resp, ll = _e_step(X, weights, means, variances)
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        weights, means, variances = _m_step(X, resp)
    model = GmmModel(weights, means, variances, tuple(trace), converged)
    labels = np.argmax(resp, axis=1).astype(np.int64)
    return model, labels, resp


def gmm_predict_proba(model: GmmModel, points) -> np.ndarray:
    P = as_matrix(points)
    if P.shape[1] != model.means.shape[1]:
        raise DataError(f"points have dimension {P.shape[1]}, model has {model.means.shape[1]}")
    resp, _ = _e_step(P, model.weights, model.means, model.variances)
    return resp


# --------------------------------------------------------------------------
# dispatch used by tuning-free callers (robustness, pipeline)


@dataclass(frozen=True)
class AlgorithmConfig:
    """Algorithm name plus its parameters.

    kmeans: k, restarts, max_iter. gmm: k, max_iter, tol. dbscan: eps,
    min_pts, metric ('euclidean' or 'dtw'), band, normalize.
    """

    name: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.name!r}; valid: {', '.join(ALGORITHMS)}")

    def with_params(self, **changes) -> "AlgorithmConfig":
        return AlgorithmConfig(self.name, {**self.params, **changes})

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


def distance_for(ds: Dataset, config: AlgorithmConfig, threads: int | None = None) -> np.ndarray:
    p = config.params
    metric = p.get("metric", "euclidean")
    return pairwise(ds, metric, band=p.get("band"), normalize=p.get("normalize", False), threads=threads)


def cluster(ds: Dataset, config: AlgorithmConfig, seed: int, dm=None,
            threads: int | None = None) -> np.ndarray:
    """Labels for ``ds`` under ``config``; ``dm`` is reused by DBSCAN when given."""
    p = config.params
    if config.name == "kmeans":
        _, labels = kmeans_fit(ds, int(p["k"]), max_iter=int(p.get("max_iter", 300)),
                               restarts=int(p.get("restarts", 8)), seed=seed, threads=threads)
        return labels
    if config.name == "gmm":
        _, labels, _ = gmm_fit(ds, int(p["k"]), max_iter=int(p.get("max_iter", 300)),
                               tol=float(p.get("tol", 1e-6)), seed=seed)
        return labels
    if dm is None:
        dm = distance_for(ds, config, threads)
    return dbscan_fit(dm, DbscanParams(float(p["eps"]), int(p.get("min_pts", 5))))
