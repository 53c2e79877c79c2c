"""Concise CART surrogate trained on cluster labels, with rule extraction."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import as_matrix
from .errors import DataError

LEAF = -1


@dataclass(frozen=True, eq=False)
class SurrogateTree:
    """Axis-aligned binary tree stored as parallel node arrays.

    Internal node ``i`` routes ``x[feature[i]] <= threshold[i]`` to
    ``left[i]`` and everything else to ``right[i]``. Leaves have
    ``feature == -1``. ``distribution[i]`` is the class distribution of the
    training rows reaching node ``i`` and ``cover[i]`` their count.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    distribution: np.ndarray
    cover: np.ndarray
    classes: np.ndarray
    n_features: int
    max_depth: int
    min_leaf: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] == LEAF

    @property
    def leaves(self) -> list[int]:
        return [i for i in range(self.n_nodes) if self.is_leaf(i)]

    def depth(self) -> int:
        def rec(i):
            if self.is_leaf(i):
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))
        return rec(0)

    def class_index(self, label) -> int:
        idx = np.flatnonzero(self.classes == label)
        if idx.size == 0:
            raise DataError(f"class {label} not in tree classes {self.classes.tolist()}")
        return int(idx[0])

    def to_dict(self) -> dict:
        """JSON shape: node list with child indices (-1 for leaves)."""
        nodes = []
        for i in range(self.n_nodes):
            leaf = self.is_leaf(i)
            nodes.append({
                "id": i,
                "feature": None if leaf else int(self.feature[i]),
                "threshold": None if leaf else float(self.threshold[i]),
                "left": int(self.left[i]),
                "right": int(self.right[i]),
                "distribution": [float(p) for p in self.distribution[i]],
                "cover": int(self.cover[i]),
            })
        return {
            "n_features": self.n_features,
            "classes": [int(c) for c in self.classes],
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SurrogateTree":
        nodes = sorted(data["nodes"], key=lambda nd: nd["id"])
        return cls(
            feature=np.array([LEAF if nd["feature"] is None else nd["feature"] for nd in nodes], dtype=np.int64),
            threshold=np.array([math.nan if nd["threshold"] is None else nd["threshold"] for nd in nodes]),
            left=np.array([nd["left"] for nd in nodes], dtype=np.int64),
            right=np.array([nd["right"] for nd in nodes], dtype=np.int64),
            distribution=np.array([nd["distribution"] for nd in nodes], dtype=float),
            cover=np.array([nd["cover"] for nd in nodes], dtype=np.int64),
            classes=np.array(data["classes"], dtype=np.int64),
            n_features=int(data["n_features"]),
            max_depth=int(data["max_depth"]),
            min_leaf=int(data["min_leaf"]),
        )

    def structurally_equal(self, other: "SurrogateTree") -> bool:
        return self.to_dict() == other.to_dict()


def default_min_leaf(n: int) -> int:
    return max(5, n // 100)


def _gini_sum(counts):
    # n * gini = n - sum(c^2) / n for each row of counts
    tot = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = tot - np.sum(counts.astype(float) ** 2, axis=-1) / tot
    return np.where(tot > 0, out, 0.0)


def _best_split(X, y, k, min_leaf):
    """(feature, threshold, impurity) of the best split, or None."""
    n, d = X.shape
    tie_tol = 1e-12 * max(1, n)
    best = None
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        onehot = np.zeros((n, k), dtype=np.int64)
        onehot[np.arange(n), y[order]] = 1
        left = np.cumsum(onehot, axis=0)[:-1]
        right = left[-1] + onehot[-1] - left
        # candidate cut after position i (left holds rows 0..i)
        sizes = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        imp = np.where(valid, _gini_sum(left) + _gini_sum(right), np.inf)
        # impurities are rationals; treat rounding-level differences as ties
        i = int(np.flatnonzero(imp <= imp.min() + tie_tol)[0])
        if best is None or imp[i] < best[2] - tie_tol:
            thr = 0.5 * (xs[i] + xs[i + 1])
            if not xs[i] <= thr < xs[i + 1]:
                thr = xs[i]
            best = (f, float(thr), float(imp[i]))
    return best


def tree_fit(ds, labels, max_depth: int = 4, min_leaf: int | None = None) -> SurrogateTree:
    """Grow a Gini CART tree mimicking ``labels``.

    Splits are chosen by exhaustive scan over midpoints of consecutive
    distinct values. Ties go to the lowest feature index, then the lowest
    threshold. Growth stops at purity, ``max_depth``, ``min_leaf`` or when no
    split lowers impurity. NOISE (-1) is treated as an ordinary class.
    """
    X = as_matrix(ds)
    labels = np.asarray(labels, dtype=np.int64)
    n, d = X.shape
    if labels.shape[0] != n:
        raise DataError("labels length differs from dataset")
    if max_depth < 0:
        raise DataError("max_depth must be >= 0")
    if min_leaf is None:
        min_leaf = default_min_leaf(n)
    if min_leaf < 1:
        raise DataError("min_leaf must be >= 1")
    classes, y = np.unique(labels, return_inverse=True)
    k = classes.size
    if k > 1 and n < 2 * min_leaf:
        raise DataError(f"n={n} too small for min_leaf={min_leaf}")

    feature, threshold, left, right, dist, cover = [], [], [], [], [], []

    def new_node(rows):
        counts = np.bincount(y[rows], minlength=k)
        feature.append(LEAF)
        threshold.append(math.nan)
        left.append(LEAF)
        right.append(LEAF)
        dist.append(counts / counts.sum())
        cover.append(int(rows.size))
        return len(feature) - 1, counts

    def grow(rows, depth):
        node, counts = new_node(rows)
        if depth >= max_depth or np.count_nonzero(counts) <= 1 or rows.size < 2 * min_leaf:
            return node
        split = _best_split(X[rows], y[rows], k, min_leaf)
        if split is None:
            return node
        f, thr, imp = split
        parent_imp = float(_gini_sum(counts[None, :])[0])
        if not imp < parent_imp - 1e-12:
            return node
        go_left = X[rows, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = grow(rows[go_left], depth + 1)
        right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(np.arange(n), 0)
    return SurrogateTree(
        np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(dist), np.array(cover, dtype=np.int64),
        classes.astype(np.int64), d, int(max_depth), int(min_leaf),
    )


def apply(tree: SurrogateTree, points) -> np.ndarray:
    """Leaf index reached by each point."""
    P = as_matrix(points)
    if P.shape[1] != tree.n_features:
        raise DataError(f"points have dimension {P.shape[1]}, tree expects {tree.n_features}")
    node = np.zeros(P.shape[0], dtype=np.int64)
    active = tree.feature[node] != LEAF
    while active.any():
        idx = np.flatnonzero(active)
        nd = node[idx]
        go_left = P[idx, tree.feature[nd]] <= tree.threshold[nd]
        node[idx] = np.where(go_left, tree.left[nd], tree.right[nd])
        active = tree.feature[node] != LEAF
    return node


def tree_predict(tree: SurrogateTree, points) -> tuple[np.ndarray, np.ndarray]:
    """Labels (argmax leaf distribution, ties to the lowest label) and probabilities."""
    leaves = apply(tree, points)
    proba = tree.distribution[leaves]
    return tree.classes[np.argmax(proba, axis=1)], proba


def tree_fidelity(tree: SurrogateTree, ds, labels) -> float:
    pred, _ = tree_predict(tree, ds)
    return float(np.mean(pred == np.asarray(labels)))


@dataclass(frozen=True)
class Rule:
    """Conjunction ``low < x[f] <= high`` per constrained feature."""

    conditions: tuple[tuple[int, float, float], ...]
    label: int
    confidence: float
    cover: int
    leaf: int

    def matches(self, points) -> np.ndarray:
        P = as_matrix(points)
        ok = np.ones(P.shape[0], dtype=bool)
        for f, lo, hi in self.conditions:
            ok &= (P[:, f] > lo) & (P[:, f] <= hi)
        return ok

    def text(self, feature_names=None, digits: int | None = None) -> str:
        fmt = (lambda v: repr(float(v))) if digits is None else (lambda v: f"{v:.{digits}g}")
        parts = []
        for f, lo, hi in self.conditions:
            name = feature_names[f] if feature_names is not None else f"f{f}"
            if math.isinf(lo):
                parts.append(f"{name} <= {fmt(hi)}")
            elif math.isinf(hi):
                parts.append(f"{name} > {fmt(lo)}")
            else:
                parts.append(f"{fmt(lo)} < {name} <= {fmt(hi)}")
        cond = " AND ".join(parts) if parts else "TRUE"
        return f"IF {cond} THEN cluster {self.label}"

    def to_dict(self, feature_names=None) -> dict:
        return {
            "conditions": [
                {"feature": int(f),
                 "name": feature_names[f] if feature_names is not None else f"f{f}",
                 "low": None if math.isinf(lo) else float(lo),
                 "high": None if math.isinf(hi) else float(hi)}
                for f, lo, hi in self.conditions
            ],
            "label": int(self.label),
            "confidence": float(self.confidence),
            "cover": int(self.cover),
            "leaf": int(self.leaf),
            "text": self.text(feature_names),
        }


def tree_rules(tree: SurrogateTree) -> list[Rule]:
    """One rule per leaf, intervals merged per feature, largest cover first."""
    rules = []

    def rec(i, bounds):
        if tree.is_leaf(i):
            dist = tree.distribution[i]
            c = int(np.argmax(dist))
            conds = tuple((f, lo, hi) for f, (lo, hi) in sorted(bounds.items()))
            rules.append(Rule(conds, int(tree.classes[c]), float(dist[c]), int(tree.cover[i]), i))
            return
        f, thr = int(tree.feature[i]), float(tree.threshold[i])
        lo, hi = bounds.get(f, (-math.inf, math.inf))
        rec(tree.left[i], {**bounds, f: (lo, min(hi, thr))})
        rec(tree.right[i], {**bounds, f: (max(lo, thr), hi)})

    rec(0, {})
    order = sorted(range(len(rules)), key=lambda r: (-rules[r].cover, r))
    return [rules[r] for r in order]
