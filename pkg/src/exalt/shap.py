"""SHAP feature attribution: KernelSHAP, path-dependent TreeSHAP, global importance."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import binom

from .dataset import as_matrix
from .errors import DataError
from .surrogate import SurrogateTree, apply

EFFICIENCY_TOL = 1e-6
EXACT_CUTOFF = 11


@dataclass(frozen=True, eq=False)
class ShapExplanation:
    base_value: float
    phi: np.ndarray
    model_output: float
    explained_class: int
    method: str = ""

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "phi", phi)
        gap = abs(self.base_value + phi.sum() - self.model_output)
        if not gap <= EFFICIENCY_TOL * max(1.0, abs(self.model_output)):
            raise ArithmeticError(f"efficiency violated: base + sum(phi) - output = {gap:.3g}")


@dataclass(frozen=True, eq=False)
class GlobalImportance:
    values: np.ndarray
    ranking: tuple[int, ...]

    def to_dict(self, feature_names=None) -> dict:
        names = feature_names or [f"f{j}" for j in range(len(self.values))]
        return {
            "mean_abs_phi": {names[j]: float(v) for j, v in enumerate(self.values)},
            "ranking": [names[j] for j in self.ranking],
        }


# --------------------------------------------------------------------------
# KernelSHAP


def _kernel_weight(d: int, s: int) -> float:
    return (d - 1) / (binom(d, s) * s * (d - s))


def _all_coalitions(d: int) -> tuple[np.ndarray, np.ndarray]:
    masks, weights = [], []
    for s in range(1, d):
        w = _kernel_weight(d, s)
        for idx in itertools.combinations(range(d), s):
            m = np.zeros(d, dtype=bool)
            m[list(idx)] = True
            masks.append(m)
            weights.append(w)
    return np.array(masks).reshape(-1, d), np.array(weights)


def _sampled_coalitions(d: int, nsamples: int, rng: np.random.Generator):
    """Shapley-kernel coalition design.

    Subset sizes are enumerated completely from the outside in (size s paired
    with d - s) while the budget allows; the remaining budget is sampled from
    the kernel distribution over the leftover sizes, complements included.
    With ``nsamples >= 2**d - 2`` every size is enumerated.
    """
    n_sizes = math.ceil((d - 1) / 2)
    n_paired = (d - 1) // 2
    weight_vector = np.array([(d - 1) / (s * (d - s)) for s in range(1, n_sizes + 1)])
    weight_vector[:n_paired] *= 2
    weight_vector /= weight_vector.sum()

    masks: list[np.ndarray] = []
    weights: list[float] = []
    left = nsamples
    full = 0
    remaining = weight_vector.copy()
    for s in range(1, n_sizes + 1):
        nsub = binom(d, s) * (2 if s <= n_paired else 1)
        if left * remaining[s - 1] / nsub < 1.0 - 1e-8:
            break
        full += 1
        left -= int(nsub)
        if remaining[s - 1] < 1.0:
            remaining /= 1.0 - remaining[s - 1]
        w = weight_vector[s - 1] / binom(d, s)
        if s <= n_paired:
            w /= 2.0
        for idx in itertools.combinations(range(d), s):
            m = np.zeros(d, dtype=bool)
            m[list(idx)] = True
            masks.append(m)
            weights.append(w)
            if s <= n_paired:
                masks.append(~m)
                weights.append(w)
    n_fixed = len(masks)

    if full < n_sizes and left > 0:
        rw = weight_vector.copy()
        rw[:n_paired] /= 2
        rw = rw[full:]
        rw /= rw.sum()
        draws = rng.choice(len(rw), 4 * left, p=rw)
        used: dict[bytes, int] = {}
        pos = 0

        def add(m):
            nonlocal left
            key = m.tobytes()
            if key in used:
                weights[used[key]] += 1.0
            else:
                used[key] = len(masks)
                masks.append(m)
                weights.append(1.0)
                left -= 1

        while left > 0 and pos < len(draws):
            s = int(draws[pos]) + full + 1
            pos += 1
            m = np.zeros(d, dtype=bool)
            m[rng.permutation(d)[:s]] = True
            add(m)
            if left > 0 and s <= n_paired:
                add(~m)
        if len(masks) > n_fixed:
            w = np.asarray(weights)
            w[n_fixed:] *= weight_vector[full:].sum() / w[n_fixed:].sum()
            weights = list(w)
    return np.array(masks).reshape(-1, d), np.asarray(weights, dtype=float)


def _solve_constrained(masks, weights, values, base, full):
    """Weighted least squares for phi subject to sum(phi) = full - base."""
    d = masks.shape[1]
    delta = full - base
    if d == 1:
        return np.array([delta])
    Z = masks.astype(float)
    y = values - base - Z[:, -1] * delta
    A = Z[:, :-1] - Z[:, [-1]]
    AtW = A.T * weights
    lhs = AtW @ A
    rhs = AtW @ y
    try:
        head = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        head = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return np.append(head, delta - head.sum())


def _batched(predict, vectorized):
    if vectorized:
        return lambda Z: np.asarray(predict(Z), dtype=float).ravel()
    return lambda Z: np.array([float(predict(z)) for z in Z])


def kernel_shap(predict: Callable, background, x, nsamples: int | None = None, seed: int = 0,
                vectorized: bool = False, exact_cutoff: int = EXACT_CUTOFF,
                explained_class: int = 0) -> ShapExplanation:
    """KernelSHAP with the interventional value function.

    ``v(S)`` is the mean model output over background rows with features in
    ``S`` taken from ``x``. Up to ``exact_cutoff`` features every coalition
    is enumerated and the regression recovers the exact Shapley values.
    ``predict`` maps a d-vector to a scalar, or an m x d array to m values
    when ``vectorized`` is set.
    """
    B = np.atleast_2d(np.asarray(background, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if B.shape[0] == 0:
        raise DataError("background must contain at least one row")
    d = x.size
    if B.shape[1] != d:
        raise DataError(f"background has {B.shape[1]} features, x has {d}")
    f = _batched(predict, vectorized)

    def evaluate(Z):
        out = f(Z)
        if not np.all(np.isfinite(out)):
            raise DataError("predict returned a non-finite value")
        return out

    fx = float(evaluate(x[None, :])[0])
    base = float(evaluate(B).mean())
    if d <= exact_cutoff:
        masks, weights = _all_coalitions(d)
        method = "kernel-exact"
    else:
        if nsamples is None:
            nsamples = 2 * d + 2048
        rng = np.random.default_rng(seed)
        masks, weights = _sampled_coalitions(d, min(int(nsamples), 2 ** d - 2), rng)
        method = "kernel-sampled"
    values = np.empty(masks.shape[0])
    chunk = max(1, 200_000 // (B.shape[0] * max(d, 1)))
    for start in range(0, masks.shape[0], chunk):
        m = masks[start:start + chunk]
        Z = np.where(m[:, None, :], x[None, None, :], B[None, :, :]).reshape(-1, d)
        values[start:start + chunk] = evaluate(Z).reshape(m.shape[0], B.shape[0]).mean(axis=1)
    phi = _solve_constrained(masks, weights, values, base, fx) if masks.size or d == 1 else np.zeros(d)
    return ShapExplanation(base, phi, fx, int(explained_class), method)


# --------------------------------------------------------------------------
# TreeSHAP (path-dependent)


class _Path:
    __slots__ = ("feature", "zero", "one", "weight")

    def __init__(self, feature=None, zero=None, one=None, weight=None):
        self.feature = feature if feature is not None else []
        self.zero = zero if zero is not None else []
        self.one = one if one is not None else []
        self.weight = weight if weight is not None else []

    def copy(self):
        return _Path(self.feature[:], self.zero[:], self.one[:], self.weight[:])

    def extend(self, zero, one, feature):
        depth = len(self.feature)
        self.feature.append(feature)
        self.zero.append(zero)
        self.one.append(one)
        self.weight.append(1.0 if depth == 0 else 0.0)
        w = self.weight
        for i in range(depth - 1, -1, -1):
            w[i + 1] += one * w[i] * (i + 1) / (depth + 1)
            w[i] = zero * w[i] * (depth - i) / (depth + 1)

    def unwind(self, idx):
        depth = len(self.feature) - 1
        one, zero = self.one[idx], self.zero[idx]
        w = self.weight
        nxt = w[depth]
        for i in range(depth - 1, -1, -1):
            if one != 0:
                tmp = w[i]
                w[i] = nxt * (depth + 1) / ((i + 1) * one)
                nxt = tmp - w[i] * zero * (depth - i) / (depth + 1)
            else:
                w[i] = w[i] * (depth + 1) / (zero * (depth - i))
        for lst in (self.feature, self.zero, self.one):
            del lst[idx]
        del w[depth]

    def unwound_sum(self, idx):
        depth = len(self.feature) - 1
        one, zero = self.one[idx], self.zero[idx]
        w = self.weight
        nxt = w[depth]
        total = 0.0
        for i in range(depth - 1, -1, -1):
            if one != 0:
                tmp = nxt * (depth + 1) / ((i + 1) * one)
                total += tmp
                nxt = w[i] - tmp * zero * (depth - i) / (depth + 1)
            elif zero != 0:
                total += w[i] / zero / ((depth - i) / (depth + 1))
        return total


def tree_shap(tree: SurrogateTree, x, explained_class) -> ShapExplanation:
    """Path-dependent TreeSHAP for the probability of ``explained_class``.

    Absent features are integrated out by following both children in
    proportion to their training covers. Runs in O(leaves * depth^2).
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != tree.n_features:
        raise DataError(f"x has {x.size} features, tree expects {tree.n_features}")
    c = tree.class_index(explained_class)
    values = tree.distribution[:, c]
    cover = tree.cover.astype(float)
    if np.any(cover <= 0):
        raise DataError(f"tree has zero-cover node {int(np.flatnonzero(cover <= 0)[0])}")
    phi = np.zeros(tree.n_features)

    def recurse(node, path, zero, one, feature):
        path = path.copy()
        path.extend(zero, one, feature)
        if tree.is_leaf(node):
            for i in range(1, len(path.feature)):
                w = path.unwound_sum(i)
                phi[path.feature[i]] += w * (path.one[i] - path.zero[i]) * values[node]
            return
        f = int(tree.feature[node])
        if x[f] <= tree.threshold[node]:
            hot, cold = tree.left[node], tree.right[node]
        else:
            hot, cold = tree.right[node], tree.left[node]
        in_zero = in_one = 1.0
        if f in path.feature[1:]:
            k = path.feature.index(f, 1)
            in_zero, in_one = path.zero[k], path.one[k]
            path.unwind(k)
        recurse(hot, path, in_zero * cover[hot] / cover[node], in_one, f)
        recurse(cold, path, in_zero * cover[cold] / cover[node], 0.0, f)

    recurse(0, _Path(), 1.0, 1.0, -1)
    base = float(values[0]) if tree.is_leaf(0) else _expected_value(tree, values, cover)
    output = float(values[apply(tree, x[None, :])[0]])
    return ShapExplanation(base, phi, output, int(explained_class), "tree")


def _expected_value(tree, values, cover):
    leaves = tree.leaves
    return float(np.sum(values[leaves] * cover[leaves]) / cover[0])


# --------------------------------------------------------------------------
# aggregation


def explain_rows(tree: SurrogateTree, X, classes: Sequence[int]) -> list[ShapExplanation]:
    """TreeSHAP explanation of every row for its own class."""
    X = as_matrix(X)
    return [tree_shap(tree, X[i], classes[i]) for i in range(X.shape[0])]


def global_importance(explanations: Iterable[ShapExplanation]) -> GlobalImportance:
    explanations = list(explanations)
    if not explanations:
        raise DataError("global_importance needs at least one explanation")
    d = explanations[0].phi.size
    if any(e.phi.size != d for e in explanations):
        raise DataError("explanations have inconsistent feature counts")
    vals = np.mean([np.abs(e.phi) for e in explanations], axis=0)
    ranking = tuple(int(j) for j in np.argsort(-vals, kind="stable"))
    return GlobalImportance(vals, ranking)


def per_class_top(explanations: Sequence[ShapExplanation], top: int = 3) -> dict[int, list[int]]:
    """Top features by mean |phi| among explanations of each class."""
    out = {}
    for c in sorted({e.explained_class for e in explanations}):
        g = global_importance(e for e in explanations if e.explained_class == c)
        out[c] = list(g.ranking[:top])
    return out
