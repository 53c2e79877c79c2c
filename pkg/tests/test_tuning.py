import numpy as np
import pytest

from exalt import dataset
from exalt.distance import euclidean_matrix
from exalt.errors import DataError
from exalt.tuning import (eps_from_kdist, elbow_scan, kdist_curve, knee_index,
                          silhouette_scan)


def _brute_kdist(X, m):
    n = len(X)
    out = []
    for i in range(n):
        d = sorted(abs(X[i] - X[j]) for j in range(n) if j != i)
        out.append(d[m - 1])
    return sorted(out)


def test_elbow_selects_three():
    ds = dataset.gen_blobs(3, 50, 2, 10.0, seed=0)
    curve = elbow_scan(ds, 1, 8, seed=1)
    assert curve.selected_value == 3
    assert np.all(np.diff(curve.scores) <= 1e-9)


def test_elbow_kmax_equals_n():
    X = np.random.default_rng(0).normal(size=(6, 2))
    curve = elbow_scan(X, 1, 6)
    assert curve.scores[-1] == 0.0


def test_knee_linear_tie_goes_to_lowest_interior():
    x = np.arange(2, 9)
    assert knee_index(x, 100.0 - 10 * x) == 1


def test_knee_picks_bend():
    y = np.array([100.0, 20, 10, 8, 6, 4])
    assert knee_index(np.arange(1, 7), y) == 1


def test_silhouette_scan_selects_three():
    ds = dataset.gen_blobs(3, 50, 2, 10.0, seed=0)
    curve = silhouette_scan(ds, 2, 8, seed=1)
    assert curve.selected_value == 3
    assert curve.scores[curve.selected] > 0.8


def test_silhouette_scan_two_far_blobs():
    ds = dataset.gen_blobs(2, 30, 2, 50.0, seed=0)
    curve = silhouette_scan(ds, 2, 5)
    assert curve.selected_value == 2 and curve.scores[0] > 0.95


def test_silhouette_scan_tie_to_smaller_k(monkeypatch):
    import exalt.tuning as tuning
    monkeypatch.setattr(tuning, "silhouette", lambda D, lab: (0.5, None))
    curve = tuning.silhouette_scan(np.random.default_rng(0).normal(size=(20, 2)), 2, 6)
    assert curve.selected_value == 2


def test_scan_ranges_validated():
    with pytest.raises(DataError):
        silhouette_scan(np.zeros((5, 1)), 1, 3)
    with pytest.raises(DataError):
        elbow_scan(np.zeros((5, 1)), 3, 3)


def test_kdist_duplicates_and_grid():
    X = np.array([0.0, 0.0, 0.0, 5.0, 9.0])
    curve = kdist_curve(euclidean_matrix(X[:, None]), 1)
    assert curve[0] == 0.0 and np.all(np.diff(curve) >= 0)
    grid = np.arange(5) * 0.7
    np.testing.assert_allclose(kdist_curve(euclidean_matrix(grid[:, None]), 1), 0.7, atol=1e-12)
    rng = np.random.default_rng(3)
    for m in (1, 2, 4):
        X = rng.normal(size=12)
        np.testing.assert_allclose(kdist_curve(euclidean_matrix(X[:, None]), m), _brute_kdist(X, m),
                                   atol=1e-12)


def test_eps_from_kdist_separates_blobs():
    ds = dataset.gen_blobs(3, 50, 2, 10.0, seed=0)
    eps = eps_from_kdist(euclidean_matrix(ds.features), 4)
    assert 0.2 < eps < 5.0


def test_knee_below_chord_finds_tail_bend():
    # concave head then a convex noise tail: the tail bend is the useful eps
    y = np.concatenate([[0.0, 3.0], np.linspace(3.1, 3.5, 16), [3.8, 4.5]])
    x = np.arange(y.size)
    assert knee_index(x, y) == 1
    assert knee_index(x, y, side="below") == 17


def test_knee_below_chord_without_bend_returns_last():
    y = np.sqrt(np.arange(1.0, 10.0))
    assert knee_index(np.arange(9), y, side="below") == 8
    with pytest.raises(DataError):
        knee_index(np.arange(3), np.arange(3.0), side="up")
