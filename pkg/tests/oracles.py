"""Slow, loop-based reference implementations used as independent oracles.

Nothing here imports the package under test except for data containers;
every quantity is recomputed from its definition.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np


def dist(a, b) -> float:
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def silhouette_bf(X, labels) -> float:
    n = len(labels)
    vals = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            vals.append(0.0)
            continue
        a = sum(dist(X[i], X[j]) for j in own) / len(own)
        b = math.inf
        for c in set(labels) - {labels[i]}:
            mem = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(dist(X[i], X[j]) for j in mem) / len(mem))
        vals.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return sum(vals) / n


def _centroid(X, idx):
    d = len(X[0])
    return [sum(float(X[j][t]) for j in idx) / len(idx) for t in range(d)]


def davies_bouldin_bf(X, labels) -> float:
    ids = sorted(set(labels))
    members = {c: [j for j in range(len(labels)) if labels[j] == c] for c in ids}
    cent = {c: _centroid(X, members[c]) for c in ids}
    scat = {c: sum(dist(X[j], cent[c]) for j in members[c]) / len(members[c]) for c in ids}
    total = 0.0
    for c in ids:
        total += max((scat[c] + scat[o]) / dist(cent[c], cent[o]) for o in ids if o != c)
    return total / len(ids)


def calinski_harabasz_bf(X, labels) -> float:
    n = len(labels)
    ids = sorted(set(labels))
    k = len(ids)
    grand = _centroid(X, range(n))
    bss = wss = 0.0
    for c in ids:
        mem = [j for j in range(n) if labels[j] == c]
        cc = _centroid(X, mem)
        bss += len(mem) * dist(cc, grand) ** 2
        wss += sum(dist(X[j], cc) ** 2 for j in mem)
    return (bss / (k - 1)) / (wss / (n - k))


def ari_bf(a, b) -> float:
    """Pair-counting form of the adjusted Rand index."""
    n = len(a)
    both = same_a = same_b = 0
    for i, j in itertools.combinations(range(n), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        both += sa and sb
        same_a += sa
        same_b += sb
    pairs = n * (n - 1) / 2
    expected = same_a * same_b / pairs
    maximum = (same_a + same_b) / 2
    if maximum == expected:
        return 1.0
    return (both - expected) / (maximum - expected)


def _h(counter, n):
    return -sum(c / n * math.log(c / n) for c in counter.values())


def nmi_bf(a, b) -> float:
    n = len(a)
    ca, cb, cab = Counter(a), Counter(b), Counter(zip(a, b))
    ha, hb = _h(ca, n), _h(cb, n)
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    mi = sum(c / n * math.log((c / n) / (ca[x] / n * cb[y] / n)) for (x, y), c in cab.items())
    return mi / math.sqrt(ha * hb)


def dtw_ref(a, b, band=None) -> float:
    """Full (n+1) x (m+1) dynamic-programming table with python lists."""
    n, m = len(a), len(b)
    D = [[math.inf] * (m + 1) for _ in range(n + 1)]
    D[0][0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if band is not None and abs(i - j) > band:
                continue
            D[i][j] = abs(float(a[i - 1]) - float(b[j - 1])) + min(D[i - 1][j - 1], D[i - 1][j], D[i][j - 1])
    return D[n][m]


def kmeans2_optimum(X) -> float:
    """Minimum inertia over every bipartition into two non-empty groups."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    best = math.inf
    for mask in range(1, 2 ** (n - 1)):
        sel = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        cost = 0.0
        for part in (X[sel], X[~sel]):
            cost += float(((part - part.mean(axis=0)) ** 2).sum())
        best = min(best, cost)
    return best


def shapley_enum(value, d: int) -> np.ndarray:
    """Shapley values from a set function ``value(frozenset) -> float``."""
    phi = np.zeros(d)
    cache = {}

    def v(S):
        if S not in cache:
            cache[S] = value(S)
        return cache[S]

    for i in range(d):
        others = [j for j in range(d) if j != i]
        for size in range(d):
            w = math.factorial(size) * math.factorial(d - size - 1) / math.factorial(d)
            for S in itertools.combinations(others, size):
                S = frozenset(S)
                phi[i] += w * (v(S | {i}) - v(S))
    return phi


def interventional_value(f, background, x):
    """v(S) = mean over background rows b of f(x on S, b elsewhere)."""
    background = np.asarray(background, dtype=float)

    def value(S):
        Z = background.copy()
        for j in S:
            Z[:, j] = x[j]
        return float(np.mean([f(z) for z in Z]))

    return value


def tree_conditional_value(tree, x, class_index):
    """Path-dependent expectation: follow x on features in S, otherwise
    average children weighted by training cover."""

    def value(S):
        def rec(i):
            if tree.feature[i] == -1:
                return float(tree.distribution[i][class_index])
            f, l, r = int(tree.feature[i]), int(tree.left[i]), int(tree.right[i])
            if f in S:
                return rec(l) if x[f] <= tree.threshold[i] else rec(r)
            cl, cr = float(tree.cover[l]), float(tree.cover[r])
            return (cl * rec(l) + cr * rec(r)) / (cl + cr)
        return rec(0)

    return value


def tree_predict_one(tree, z, class_index) -> float:
    i = 0
    while tree.feature[i] != -1:
        i = int(tree.left[i]) if z[int(tree.feature[i])] <= tree.threshold[i] else int(tree.right[i])
    return float(tree.distribution[i][class_index])
