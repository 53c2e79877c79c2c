import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exalt.errors import DataError
from exalt.shap import (ShapExplanation, explain_rows, global_importance, kernel_shap,
                        per_class_top, tree_shap)
from exalt.surrogate import SurrogateTree, tree_fit, tree_predict

import oracles


def random_tree(rng, d, depth, n=60, k=3):
    X = np.round(rng.normal(size=(n, d)), 2)
    y = rng.integers(0, k, n)
    return tree_fit(X, y, max_depth=depth, min_leaf=2), X


def test_linear_model_exact():
    f = lambda z: 2 * z[0] + 3 * z[1]
    e = kernel_shap(f, np.zeros((1, 2)), np.array([1.0, 1.0]))
    np.testing.assert_allclose(e.phi, [2.0, 3.0], atol=1e-12)
    assert e.base_value == 0.0 and e.model_output == 5.0


def test_x_equal_background():
    f = lambda z: np.sin(z).sum() + z[0] * z[2]
    x = np.array([0.3, -1.0, 2.0])
    e = kernel_shap(f, x[None, :], x)
    np.testing.assert_allclose(e.phi, 0.0, atol=1e-12)
    assert e.base_value == f(x)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000))
def test_kernel_exact_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 7))
    W = rng.normal(size=(d, d))
    f = lambda z: float(np.tanh(z @ W @ z) + z.sum())
    B = rng.normal(size=(int(rng.integers(1, 8)), d))
    x = rng.normal(size=d)
    e = kernel_shap(f, B, x)
    ref = oracles.shapley_enum(oracles.interventional_value(f, B, x), d)
    np.testing.assert_allclose(e.phi, ref, atol=1e-9)


def test_symmetric_features_share_credit():
    rng = np.random.default_rng(4)
    f = lambda z: float(z[1] * z[3] + np.exp(z[1]) + np.exp(z[3]) + z[0])
    B, x = rng.normal(size=(6, 4)), rng.normal(size=4)
    x[3] = x[1]
    B[:, 3] = B[:, 1]              # symmetric background makes v(S) symmetric too
    phi = kernel_shap(f, B, x).phi
    assert abs(phi[1] - phi[3]) <= 1e-9


def test_dummy_feature_gets_zero():
    rng = np.random.default_rng(6)
    f = lambda z: float(np.sin(z[0]) * z[2] + z[3] ** 2)
    B, x = rng.normal(size=(5, 4)), rng.normal(size=4)
    assert abs(kernel_shap(f, B, x).phi[1]) <= 1e-9


def test_kernel_sampled_mode_full_budget_is_exact():
    rng = np.random.default_rng(3)
    d = 6
    f = lambda Z: np.prod(np.tanh(Z), axis=1) + Z[:, 0] ** 2
    B, x = rng.normal(size=(5, d)), rng.normal(size=d)
    exact = kernel_shap(f, B, x, vectorized=True)
    sampled = kernel_shap(f, B, x, nsamples=10 ** 6, vectorized=True, exact_cutoff=0)
    assert sampled.method == "kernel-sampled"
    np.testing.assert_allclose(sampled.phi, exact.phi, atol=1e-9)


def test_kernel_sampled_mode_approximates():
    rng = np.random.default_rng(4)
    d = 14
    w = rng.normal(size=d)
    f = lambda Z: Z @ w + 0.3 * Z[:, 0] * Z[:, 1]
    B, x = rng.normal(size=(10, d)), rng.normal(size=d)
    e = kernel_shap(f, B, x, nsamples=3000, vectorized=True, seed=1)
    ref = w * (x - B.mean(axis=0))
    assert np.max(np.abs(e.phi - ref)) < 0.2
    assert abs(e.base_value + e.phi.sum() - e.model_output) < 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_tree_shap_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    d, depth = int(rng.integers(1, 9)), int(rng.integers(1, 5))
    tree, X = random_tree(rng, d, depth)
    x = rng.normal(size=d)
    for label in tree.classes:
        e = tree_shap(tree, x, label)
        ref = oracles.shapley_enum(oracles.tree_conditional_value(tree, x, tree.class_index(label)), d)
        np.testing.assert_allclose(e.phi, ref, atol=1e-9)


def test_tree_shap_depth0():
    X = np.random.default_rng(0).normal(size=(10, 3))
    tree = tree_fit(X, np.array([0] * 7 + [1] * 3), max_depth=0)
    e = tree_shap(tree, X[0], 1)
    np.testing.assert_array_equal(e.phi, 0.0)
    assert e.base_value == pytest.approx(0.3)


def test_tree_shap_depth1_hand():
    L = -1
    tree = SurrogateTree(np.array([0, L, L]), np.array([0.5, np.nan, np.nan]), np.array([1, L, L]),
                         np.array([2, L, L]), np.array([[0.5, 0.5], [1.0, 0.0], [0.0, 1.0]]),
                         np.array([10, 5, 5]), np.array([0, 1]), 3, 1, 1)
    e = tree_shap(tree, np.array([1.0, -4.0, 9.0]), 1)
    np.testing.assert_allclose(e.phi, [0.5, 0.0, 0.0], atol=1e-15)
    assert e.base_value == 0.5 and e.model_output == 1.0


def test_tree_and_kernel_agree_on_product_grid():
    # background = full product grid used to train the tree: path-dependent and
    # interventional expectations coincide because features are independent
    grid = np.array(list(itertools.product([0.0, 1.0], repeat=4)))
    X = np.repeat(grid, 2, axis=0)
    y = (X[:, 0] + X[:, 1] + X[:, 2] * X[:, 3]).astype(int)
    tree = tree_fit(X, y, max_depth=3, min_leaf=1)
    internal = [i for i in range(tree.n_nodes) if not tree.is_leaf(i)]
    assert len(internal) >= 3
    assert all(tree.cover[tree.left[i]] * 2 == tree.cover[i] for i in internal)
    for x in grid:
        for c in range(tree.classes.size):
            f = lambda Z, c=c: tree_predict(tree, Z)[1][:, c]
            k = kernel_shap(f, X, x, vectorized=True)
            t = tree_shap(tree, x, tree.classes[c])
            np.testing.assert_allclose(k.phi, t.phi, atol=1e-9)
            assert k.base_value == pytest.approx(t.base_value, abs=1e-12)


def test_efficiency_is_enforced():
    with pytest.raises(ArithmeticError):
        ShapExplanation(0.0, np.array([1.0]), 2.0, 0)


def test_global_importance_rules():
    e = ShapExplanation(0.0, np.array([2.0, -3.0]), -1.0, 0)
    gi = global_importance([e])
    np.testing.assert_array_equal(gi.values, [2.0, 3.0])
    assert gi.ranking == (1, 0)
    gi2 = global_importance([e, e])
    np.testing.assert_array_equal(gi2.values, gi.values)


def test_unused_feature_importance_zero():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 3))
    y = (X[:, 0] > 0).astype(int)
    tree = tree_fit(X, y, max_depth=3)
    expl = explain_rows(tree, X, y)
    used = set(tree.feature[tree.feature >= 0].tolist())
    gi = global_importance(expl)
    for j in range(3):
        if j not in used:
            assert gi.values[j] == 0.0
    top = per_class_top(expl, 2)
    assert set(top) == {0, 1} and all(len(v) == 2 for v in top.values())


def test_kernel_shap_input_errors():
    with pytest.raises(DataError):
        kernel_shap(lambda z: 0.0, np.zeros((0, 2)), np.zeros(2))
    with pytest.raises(DataError):
        kernel_shap(lambda z: 0.0, np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(DataError):
        kernel_shap(lambda z: float("nan"), np.zeros((1, 2)), np.ones(2))
