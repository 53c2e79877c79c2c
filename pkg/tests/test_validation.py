import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exalt.dataset import Dataset
from exalt.distance import euclidean_matrix
from exalt.errors import DataError
from exalt.validation import (adjusted_rand, calinski_harabasz, davies_bouldin, nmi,
                              silhouette, validate)

import oracles

labelings = st.lists(st.integers(0, 3), min_size=2, max_size=30)


def test_line4_anchors(line4):
    ds, lab = line4
    # per point a = 1, b in {10.5, 9.5}
    expected = np.mean([1 - 1 / 10.5, 1 - 1 / 9.5, 1 - 1 / 9.5, 1 - 1 / 10.5])
    sil, per = silhouette(euclidean_matrix(ds.features), lab)
    assert abs(sil - expected) < 1e-12
    assert round(sil, 4) == 0.8997
    assert abs(davies_bouldin(ds, lab) - 0.1) < 1e-12
    assert abs(calinski_harabasz(ds, lab) - 200.0) < 1e-12


def test_calinski_worse_labeling(line4):
    ds, _ = line4
    # centroids 5 and 6 around grand mean 5.5: BSS = 4 * 0.25 = 1, WSS = 100
    ch = calinski_harabasz(ds, [0, 1, 0, 1])
    assert abs(ch - 0.02) < 1e-12
    assert ch < 200


def test_silhouette_conventions():
    D = euclidean_matrix(np.array([[0.0], [0.0], [5.0], [5.0]]))
    assert silhouette(D, [0, 0, 1, 1])[0] == 1.0
    D = euclidean_matrix(np.arange(4.0)[:, None])
    sil, per = silhouette(D, [0, 1, 2, 3])
    assert sil == 0.0 and np.all(per == 0.0)


def test_silhouette_noise_excluded():
    D = euclidean_matrix(np.array([[0.0], [1.0], [10.0], [11.0], [50.0]]))
    sil, per = silhouette(D, [0, 0, 1, 1, -1])
    assert math.isnan(per[4])
    assert sil == pytest.approx(silhouette(D[:4, :4], [0, 0, 1, 1])[0])


def test_davies_bouldin_properties():
    X = np.array([[0.0, 0], [0, 0], [4, 4], [4, 4]])
    assert davies_bouldin(X, [0, 0, 1, 1]) == 0.0
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 3))
    lab = rng.integers(0, 3, 20)
    assert davies_bouldin(X * 7.5, lab) == pytest.approx(davies_bouldin(X, lab), rel=1e-12)


def test_calinski_label_renaming(line4):
    ds, lab = line4
    assert calinski_harabasz(ds, 1 - lab) == calinski_harabasz(ds, lab)


def test_ari_anchors():
    assert adjusted_rand([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert abs(adjusted_rand([0, 0, 1, 1], [0, 0, 1, 2]) - 4 / 7) < 1e-12


def test_ari_random_mean_near_zero():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 4, 200)
    vals = [adjusted_rand(a, rng.integers(0, 4, 200)) for _ in range(100)]
    assert abs(np.mean(vals)) < 0.05


def test_nmi_anchors():
    assert nmi([0, 1, 2, 2], [0, 1, 2, 2]) == 1.0
    assert abs(nmi([0, 1, 0, 1], [0, 0, 1, 1])) < 1e-15
    assert abs(nmi([0, 0, 1, 1], [0, 0, 1, 2]) - oracles.nmi_bf([0, 0, 1, 1], [0, 0, 1, 2])) < 1e-12


@settings(max_examples=60, deadline=None)
@given(labelings, st.data())
def test_ari_nmi_match_brute_force(a, data):
    b = data.draw(st.lists(st.integers(0, 3), min_size=len(a), max_size=len(a)))
    assert abs(adjusted_rand(a, b) - oracles.ari_bf(a, b)) < 1e-9
    assert abs(nmi(a, b) - oracles.nmi_bf(a, b)) < 1e-9
    assert adjusted_rand(a, b) == pytest.approx(adjusted_rand(b, a), abs=1e-12)


def test_internal_indices_match_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n, d, k = rng.integers(6, 25), rng.integers(1, 4), rng.integers(2, 4)
        X = rng.normal(size=(n, d))
        lab = np.concatenate([np.arange(k), rng.integers(0, k, n - k)])
        assert abs(silhouette(euclidean_matrix(X), lab)[0] - oracles.silhouette_bf(X, lab)) < 1e-9
        assert abs(davies_bouldin(X, lab) - oracles.davies_bouldin_bf(X, lab)) < 1e-9
        assert abs(calinski_harabasz(X, lab) - oracles.calinski_harabasz_bf(X, lab)) < 1e-9 * max(
            1, oracles.calinski_harabasz_bf(X, lab))


def test_degenerate_cases_raise_or_note():
    with pytest.raises(DataError):
        silhouette(np.zeros((3, 3)), [0, 0, 0])
    with pytest.raises(DataError, match="coincident"):
        davies_bouldin(np.array([[0.0], [2.0], [1.0], [1.0]]), [0, 0, 1, 1])
    scores = validate(Dataset(np.arange(4.0)[:, None]), [0, 0, 0, 0])
    assert scores.silhouette is None and len(scores.notes) == 3


def test_validate_reports_noise_and_truth():
    ds = Dataset(np.array([[0.0], [1.0], [10.0], [11.0], [50.0]]), truth=[0, 0, 1, 1, 2])
    s = validate(ds, [0, 0, 1, 1, -1], ds.truth)
    assert s.n_noise_excluded == 1 and s.n_clusters == 2
    assert s.ari == pytest.approx(oracles.ari_bf([0, 0, 1, 1, -1], [0, 0, 1, 1, 2]))
    assert s.to_dict()["n_noise_excluded"] == 1
