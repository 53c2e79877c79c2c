"""Euclidean and dynamic-time-warping distances, dense pairwise matrices."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np

from .dataset import Dataset, as_matrix
from .errors import DataError

METRICS = ("euclidean", "dtw")


def euclidean(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DataError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


@numba.njit(cache=True, nogil=True)
def _dtw_kernel(a, b, band):
    n, m = a.shape[0], b.shape[0]
    inf = np.inf
    prev = np.full(m + 1, inf)
    cur = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = inf
        lo, hi = 1, m
        if band >= 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(a[i - 1] - b[j - 1]) + best
        prev, cur = cur, prev
    return prev[m]


def dtw(a, b, band: int | None = None, normalize: bool = False) -> float:
    """Accumulated cost of the optimal warping path between two sequences.

    Local cost is ``|a_i - b_j|`` with the symmetric {match, insert, delete}
    step pattern. ``band`` is an optional Sakoe-Chiba half-width. With
    ``normalize`` the cost is divided by ``len(a) + len(b)``.
    """
    a = np.ascontiguousarray(a, dtype=float).ravel()
    b = np.ascontiguousarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise DataError("dtw needs non-empty sequences")
    if band is None:
        w = -1
    else:
        w = int(band)
        if w < abs(a.size - b.size):
            raise DataError(f"band {w} too narrow for lengths {a.size} and {b.size}")
    cost = float(_dtw_kernel(a, b, w))
    if normalize:
        cost /= a.size + b.size
    return cost


def check_distance_matrix(dm, tol: float = 1e-12) -> np.ndarray:
    D = np.asarray(dm, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DataError(f"distance matrix must be square, got {D.shape}")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise DataError("distance matrix has negative or non-finite entries")
    if np.any(np.diag(D) != 0):
        raise DataError("distance matrix diagonal must be zero")
    if np.max(np.abs(D - D.T), initial=0.0) > tol:
        raise DataError("distance matrix is not symmetric")
    return D


def euclidean_matrix(X) -> np.ndarray:
    X = as_matrix(X)
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    D = np.sqrt(sq)
    np.fill_diagonal(D, 0.0)
    return D


def pairwise(ds: Dataset, metric: str = "euclidean", band: int | None = None,
             normalize: bool = False, threads: int | None = None) -> np.ndarray:
    """Dense symmetric distance matrix; each unordered pair is computed once."""
    if metric == "euclidean":
        return euclidean_matrix(ds)
    if metric != "dtw":
        raise DataError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if not isinstance(ds, Dataset) or ds.sequences is None:
        raise DataError("dtw requires a dataset with raw sequences")
    seqs = [np.ascontiguousarray(s) for s in ds.sequences]
    n = len(seqs)
    D = np.zeros((n, n))

    def row(i):
        return [dtw(seqs[i], seqs[j], band, normalize) for j in range(i + 1, n)]

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(row, range(n)))
    else:
        rows = [row(i) for i in range(n)]
    for i, vals in enumerate(rows):
        D[i, i + 1:] = vals
        D[i + 1:, i] = vals
    return D
