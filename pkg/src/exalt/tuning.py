"""Choosing the number of clusters (elbow, silhouette) and DBSCAN's eps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import kmeans_fit
from .dataset import as_matrix
from .distance import check_distance_matrix, euclidean_matrix
from .errors import DataError
from .validation import silhouette


@dataclass(frozen=True)
class TuningCurve:
    method: str
    values: tuple
    scores: tuple[float, ...]
    selected: int

    def __post_init__(self):
        if len(self.values) != len(self.scores):
            raise DataError("values and scores differ in length")
        if not 0 <= self.selected < len(self.values):
            raise DataError("selected index out of range")

    @property
    def selected_value(self):
        return self.values[self.selected]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "values": [v.item() if hasattr(v, "item") else v for v in self.values],
            "scores": [float(s) for s in self.scores],
            "selected": self.selected,
            "selected_value": self.selected_value,
        }


def knee_index(x, y, rel_tol: float = 1e-9, side: str = "any") -> int:
    """Index of the point farthest from the chord through the endpoints.

    Only interior points compete; near-ties (within ``rel_tol`` of the curve's
    span) resolve to the lowest index. ``side="below"`` restricts the search
    to points under the chord (the convex bend of an increasing curve) and
    returns the last index when there are none. Curves of length < 3
    return 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if side not in ("any", "below"):
        raise DataError(f"side must be 'any' or 'below', got {side!r}")
    if x.size < 3:
        return 0
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    norm = np.hypot(dx, dy)
    if norm == 0:
        return 1
    # positive where the point lies above the chord (for dx > 0)
    signed = (dx * (y - y[0]) - dy * (x - x[0])) / norm
    inner = signed[1:-1]
    span = max(np.ptp(y), np.ptp(x))
    if side == "below":
        inner = np.where(inner < 0, -inner, -np.inf)
        if not np.isfinite(inner).any():
            return x.size - 1
    else:
        inner = np.abs(inner)
    best = inner.max()
    return 1 + int(np.flatnonzero(inner >= best - rel_tol * span)[0])


def elbow_scan(ds, k_min: int, k_max: int, seed: int = 0, restarts: int = 8,
               max_iter: int = 300) -> TuningCurve:
    X = as_matrix(ds)
    n = X.shape[0]
    if not 1 <= k_min < k_max <= n:
        raise DataError(f"need 1 <= k_min < k_max <= n={n}, got [{k_min}, {k_max}]")
    ks = tuple(range(k_min, k_max + 1))
    inertia = tuple(kmeans_fit(X, k, max_iter=max_iter, restarts=restarts, seed=seed)[0].inertia
                    for k in ks)
    return TuningCurve("elbow", ks, inertia, knee_index(ks, inertia))


def silhouette_scan(ds, k_min: int, k_max: int, seed: int = 0, restarts: int = 8,
                    max_iter: int = 300) -> TuningCurve:
    X = as_matrix(ds)
    n = X.shape[0]
    if not 2 <= k_min < k_max <= n - 1:
        raise DataError(f"need 2 <= k_min < k_max <= n-1={n - 1}, got [{k_min}, {k_max}]")
    D = euclidean_matrix(X)
    ks = tuple(range(k_min, k_max + 1))
    scores = []
    for k in ks:
        _, labels = kmeans_fit(X, k, max_iter=max_iter, restarts=restarts, seed=seed)
        if np.unique(labels).size < 2:
            scores.append(-1.0)
        else:
            scores.append(silhouette(D, labels)[0])
    return TuningCurve("silhouette", ks, tuple(scores), int(np.argmax(scores)))


def kdist_curve(dm, min_pts: int) -> np.ndarray:
    """Sorted distances from each point to its ``min_pts``-th nearest other point."""
    D = check_distance_matrix(dm)
    n = D.shape[0]
    if not 1 <= min_pts < n:
        raise DataError(f"min_pts must satisfy 1 <= min_pts < n={n}")
    others = D.copy()
    np.fill_diagonal(others, np.inf)
    kth = np.sort(others, axis=1)[:, min_pts - 1]
    return np.sort(kth)


def eps_from_kdist(dm, min_pts: int) -> float:
    """eps read off the convex knee of the k-distance curve.

    The knee is searched below the chord only, where the curve bends up into
    its noise tail; a curve with no such bend yields its largest value.
    """
    curve = kdist_curve(dm, min_pts)
    idx = knee_index(np.arange(curve.size), curve, side="below")
    eps = float(curve[idx])
    if eps <= 0:
        positive = curve[curve > 0]
        if positive.size == 0:
            raise DataError("all k-distances are zero; cannot choose eps")
        eps = float(positive[0])
    return eps
