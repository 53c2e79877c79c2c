"""Internal validity indices and external agreement scores."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import NOISE
from .dataset import as_matrix
from .distance import check_distance_matrix, euclidean_matrix
from .errors import DataError


@dataclass(frozen=True)
class ValidationScores:
    """Scores for one labeling.

    Internal indices are ``None`` when undefined for the labeling (fewer
    than two clusters, zero within-cluster scatter, ...); ``notes`` says why.
    """

    silhouette: float | None
    davies_bouldin: float | None
    calinski_harabasz: float | None
    ari: float | None = None
    nmi: float | None = None
    n_noise_excluded: int = 0
    n_clusters: int = 0
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "calinski_harabasz": self.calinski_harabasz,
            "ari": self.ari,
            "nmi": self.nmi,
            "n_noise_excluded": self.n_noise_excluded,
            "n_clusters": self.n_clusters,
            "notes": list(self.notes),
        }


def _non_noise(labels):
    labels = np.asarray(labels, dtype=np.int64)
    keep = labels != NOISE
    return keep, labels[keep]


def silhouette(dm, labels) -> tuple[float, np.ndarray]:
    """Mean silhouette and per-point values (NaN for NOISE points).

    Singleton clusters score 0.
    """
    D = check_distance_matrix(dm)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != D.shape[0]:
        raise DataError("labels and distance matrix sizes differ")
    keep, lab = _non_noise(labels)
    ids = np.unique(lab)
    if ids.size < 2:
        raise DataError(f"silhouette needs >= 2 clusters, got {ids.size}")
    Dk = D[np.ix_(keep, keep)]
    onehot = (lab[:, None] == ids[None, :]).astype(float)
    sizes = onehot.sum(axis=0)
    sums = Dk @ onehot
    own = np.searchsorted(ids, lab)
    own_size = sizes[own]
    rows = np.arange(lab.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = sums[rows, own] / (own_size - 1)
        means = sums / sizes[None, :]
    means[rows, own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.zeros(lab.size)
    ok = (own_size > 1) & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    per_point = np.full(labels.shape[0], np.nan)
    per_point[keep] = s
    return float(s.mean()), per_point


def _centroids(X, lab):
    ids = np.unique(lab)
    C = np.array([X[lab == c].mean(axis=0) for c in ids])
    return ids, C


def davies_bouldin(ds, labels) -> float:
    X = as_matrix(ds)
    keep, lab = _non_noise(labels)
    X = X[keep]
    ids, C = _centroids(X, lab)
    k = ids.size
    if k < 2:
        raise DataError(f"Davies-Bouldin needs >= 2 clusters, got {k}")
    S = np.array([np.mean(np.linalg.norm(X[lab == c] - C[i], axis=1)) for i, c in enumerate(ids)])
    total = 0.0
    for i in range(k):
        worst = -math.inf
        for j in range(k):
            if i == j:
                continue
            m = float(np.linalg.norm(C[i] - C[j]))
            if m == 0:
                raise DataError(f"clusters {ids[i]} and {ids[j]} have coincident centroids")
            worst = max(worst, (S[i] + S[j]) / m)
        total += worst
    return total / k


def calinski_harabasz(ds, labels) -> float:
    X = as_matrix(ds)
    keep, lab = _non_noise(labels)
    X = X[keep]
    n = X.shape[0]
    ids, C = _centroids(X, lab)
    k = ids.size
    if not 2 <= k <= n - 1:
        raise DataError(f"Calinski-Harabasz needs 2 <= k <= n-1, got k={k}, n={n}")
    grand = X.mean(axis=0)
    counts = np.array([np.sum(lab == c) for c in ids])
    bss = float(np.sum(counts * np.sum((C - grand) ** 2, axis=1)))
    wss = float(sum(np.sum((X[lab == c] - C[i]) ** 2) for i, c in enumerate(ids)))
    if wss == 0:
        raise DataError("Calinski-Harabasz undefined: within-cluster dispersion is zero")
    return (bss / (k - 1)) / (wss / (n - k))


def contingency(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape:
        raise DataError(f"label lengths differ: {a.size} vs {b.size}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max(initial=-1) + 1, bi.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return x * (x - 1) / 2


def adjusted_rand(a, b) -> float:
    """Adjusted Rand index; NOISE is treated as an ordinary label."""
    table = contingency(a, b)
    n = int(table.sum())
    if n < 2:
        raise DataError("adjusted_rand needs at least 2 points")
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        # both partitions trivial and identical in kind
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Mutual information normalised by the geometric mean of entropies."""
    table = contingency(a, b)
    n = table.sum()
    if n == 0:
        raise DataError("nmi needs at least 1 point")
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    pij = table / n
    pa = table.sum(axis=1)[:, None] / n
    pb = table.sum(axis=0)[None, :] / n
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / (pa @ pb)[nz])))
    return max(0.0, mi / math.sqrt(ha * hb))


def validate(ds, labels, truth=None, dm=None) -> ValidationScores:
    """All indices for ``labels``; silhouette uses ``dm`` when given, else
    Euclidean distances on the feature matrix."""
    labels = np.asarray(labels, dtype=np.int64)
    keep, lab = _non_noise(labels)
    k = int(np.unique(lab).size)
    notes = []
    sil = db = ch = None
    try:
        sil = silhouette(euclidean_matrix(ds) if dm is None else dm, labels)[0]
    except DataError as exc:
        notes.append(f"silhouette: {exc}")
    try:
        db = davies_bouldin(ds, labels)
    except DataError as exc:
        notes.append(f"davies_bouldin: {exc}")
    try:
        ch = calinski_harabasz(ds, labels)
    except DataError as exc:
        notes.append(f"calinski_harabasz: {exc}")
    ari = nm = None
    if truth is not None:
        ari = adjusted_rand(labels, truth)
        nm = nmi(labels, truth)
    return ValidationScores(sil, db, ch, ari, nm, int((~keep).sum()), k, tuple(notes))
