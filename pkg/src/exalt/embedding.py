"""2-D projections for visual inspection: PCA and exact t-SNE."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import as_matrix
from .errors import DataError

MAX_TSNE_POINTS = 5000


@dataclass(frozen=True, eq=False)
class Embedding2D:
    coords: np.ndarray
    method: str
    params: dict
    quality: float
    kl_trace: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise DataError(f"embedding must be n x 2, got {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise DataError("embedding has non-finite coordinates")

    def to_dict(self) -> dict:
        return {"method": self.method, "params": dict(self.params), "trustworthiness": float(self.quality)}


def default_neighbors(n: int) -> int:
    return max(1, min(10, (n - 1) // 2))


def _sq_dist(X):
    s = np.sum(X ** 2, axis=1)
    D = s[:, None] + s[None, :] - 2 * X @ X.T
    np.maximum(D, 0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def trustworthiness(ds, emb, k: int) -> float:
    """Trustworthiness of the embedded k-neighbourhoods, in [0, 1]."""
    X = as_matrix(ds)
    Y = emb.coords if isinstance(emb, Embedding2D) else np.asarray(emb, dtype=float)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise DataError("embedding and dataset sizes differ")
    if not 1 <= k < n / 2:
        raise DataError(f"k must satisfy 1 <= k < n/2 = {n / 2}")
    DX = _sq_dist(X)
    DY = _sq_dist(Y)
    np.fill_diagonal(DX, np.inf)
    np.fill_diagonal(DY, np.inf)
    order_x = np.argsort(DX, axis=1, kind="stable")
    rank = np.empty((n, n), dtype=np.int64)
    rank[np.arange(n)[:, None], order_x] = np.arange(1, n + 1)[None, :]
    nn_y = np.argsort(DY, axis=1, kind="stable")[:, :k]
    r = rank[np.arange(n)[:, None], nn_y]
    penalty = np.sum(np.maximum(r - k, 0))
    return float(1.0 - 2.0 / (n * k * (2 * n - 3 * k - 1)) * penalty)


def pca2d(ds) -> Embedding2D:
    """Projection onto the top two principal axes.

    Each axis is signed so its largest-magnitude loading is positive.
    """
    X = as_matrix(ds)
    n, d = X.shape
    if n < 3 or d < 2:
        raise DataError(f"pca2d needs n >= 3 and d >= 2, got n={n}, d={d}")
    Xc = X - X.mean(axis=0)
    if not np.any(Xc):
        raise DataError("pca2d: all rows are identical")
    cov = Xc.T @ Xc / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:2]
    V = evecs[:, order]
    for j in range(2):
        if V[np.argmax(np.abs(V[:, j])), j] < 0:
            V[:, j] = -V[:, j]
    Y = Xc @ V
    k = default_neighbors(n)
    return Embedding2D(Y, "pca", {"explained_variance": [float(e) for e in evals[order]],
                                  "trust_k": k}, trustworthiness(X, Y, k))


def _conditional_p(D2, perplexity, tol=1e-4, max_iter=200):
    """Row-wise Gaussian affinities with bandwidth bisected to the target perplexity."""
    n = D2.shape[0]
    P = np.zeros((n, n))
    target = math.log(perplexity)
    for i in range(n):
        d = np.delete(D2[i], i)
        d = d - d.min()
        beta, lo, hi = 1.0, 0.0, math.inf
        for _ in range(max_iter):
            w = np.exp(-d * beta)
            sw = w.sum()
            p = w / sw
            H = float(-np.sum(p[p > 0] * np.log(p[p > 0])))
            if abs(math.exp(H) - perplexity) < tol:
                break
            if H > target:
                lo = beta
                beta = beta * 2 if math.isinf(hi) else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        P[i, np.arange(n) != i] = p
    return P


def _kl_and_grad(P, Y, exaggeration=1.0):
    num = 1.0 / (1.0 + _sq_dist(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), 1e-12)
    PQ = (exaggeration * P - Q) * num
    grad = 4.0 * (np.diag(PQ.sum(axis=1)) - PQ) @ Y
    kl = float(np.sum(P * np.log(P / Q)))
    return kl, grad


def tsne(ds, perplexity: float = 30.0, iters: int = 1000, seed: int = 0,
         learning_rate: float = 200.0, exaggeration: float = 12.0,
         exaggeration_iters: int = 250, checkpoint: int = 50) -> Embedding2D:
    """Exact t-SNE with momentum, gains and early exaggeration.

    After the exaggeration phase a step is accepted only if it does not
    increase the KL divergence; otherwise the learning rate is halved and
    the momentum reset, so the recorded KL trace is nonincreasing.
    """
    X = as_matrix(ds)
    n = X.shape[0]
    if n < 10:
        raise DataError(f"tsne needs n >= 10, got {n}")
    if n > MAX_TSNE_POINTS:
        raise DataError(f"exact tsne capped at {MAX_TSNE_POINTS} points, got {n}")
    if not 1 <= perplexity <= (n - 1) / 3:
        raise DataError(f"perplexity {perplexity} infeasible for n={n}; need 1 <= p <= {(n - 1) / 3:.4g}")
    Pc = _conditional_p(_sq_dist(X), perplexity)
    P = np.maximum((Pc + Pc.T) / (2 * n), 1e-12)
    rng = np.random.default_rng(seed)
    Y = 1e-4 * rng.standard_normal((n, 2))
    vel = np.zeros_like(Y)
    gains = np.ones_like(Y)
    lr = learning_rate
    trace = []
    kl = None
    cached = None
    for it in range(iters):
        exag = exaggeration if it < exaggeration_iters else 1.0
        momentum = 0.5 if it < exaggeration_iters else 0.8
        cur_kl, grad = cached if cached is not None else _kl_and_grad(P, Y, exag)
        if it < exaggeration_iters:
            gains = np.where(np.sign(grad) != np.sign(vel), gains + 0.2, gains * 0.8)
            np.maximum(gains, 0.01, out=gains)
            vel = momentum * vel - lr * gains * grad
            Y = Y + vel
            Y -= Y.mean(axis=0)
            continue
        if kl is None:
            kl = cur_kl
            trace.append(kl)
        while True:
            new_gains = np.maximum(np.where(np.sign(grad) != np.sign(vel), gains + 0.2, gains * 0.8), 0.01)
            new_vel = momentum * vel - lr * new_gains * grad
            Y_new = Y + new_vel
            Y_new -= Y_new.mean(axis=0)
            new_kl, new_grad = _kl_and_grad(P, Y_new)
            if new_kl <= kl:
                Y, vel, gains, kl = Y_new, new_vel, new_gains, new_kl
                cached = (new_kl, new_grad)
                break
            lr *= 0.5
            vel = np.zeros_like(vel)
            if lr < 1e-12:
                break
        if (it + 1) % checkpoint == 0 or it == iters - 1:
            trace.append(kl)
    k = default_neighbors(n)
    params = {"perplexity": float(perplexity), "iters": int(iters), "seed": int(seed),
              "learning_rate": float(learning_rate), "exaggeration": float(exaggeration),
              "exaggeration_iters": int(exaggeration_iters), "trust_k": k}
    return Embedding2D(Y, "tsne", params, trustworthiness(X, Y, k), tuple(trace))
