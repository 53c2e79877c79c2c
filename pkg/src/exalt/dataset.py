"""Dataset container, CSV ingestion, scaling and synthetic ground-truth generators."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import BinaryIO, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n x d feature table.

    Parameters
    ----------
    features : array_like, shape (n, d)
        Finite real values.
    feature_names : sequence of str, optional
        Unique, non-empty column names; defaults to x0 .. x{d-1}.
    truth : array_like of int, optional
        Ground-truth labels, one per row.
    sequences : sequence of 1-D arrays, optional
        Raw per-row sequences (sequence datasets only).
    """

    features: np.ndarray
    feature_names: tuple[str, ...] | None = None
    truth: np.ndarray | None = None
    sequences: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or infinite values")
        if self.feature_names is None:
            names = tuple(f"x{j}" for j in range(X.shape[1]))
        else:
            names = tuple(str(s) for s in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        if any(not s for s in names):
            raise DataError("feature names must be non-empty")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "feature_names", names)

        if self.truth is not None:
            t = np.array(self.truth, dtype=np.int64).ravel()
            if len(t) != X.shape[0]:
                raise DataError(f"truth has {len(t)} labels for {X.shape[0]} rows")
            t.setflags(write=False)
            object.__setattr__(self, "truth", t)

        if self.sequences is not None:
            seqs = []
            for i, s in enumerate(self.sequences):
                a = np.array(s, dtype=float).ravel()
                if a.size < 1:
                    raise DataError(f"sequence {i} is empty")
                if not np.all(np.isfinite(a)):
                    raise DataError(f"sequence {i} contains non-finite values")
                a.setflags(write=False)
                seqs.append(a)
            if len(seqs) != X.shape[0]:
                raise DataError(f"{len(seqs)} sequences for {X.shape[0]} rows")
            object.__setattr__(self, "sequences", tuple(seqs))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def replace(self, **changes) -> "Dataset":
        kw = dict(features=self.features, feature_names=self.feature_names,
                  truth=self.truth, sequences=self.sequences)
        kw.update(changes)
        return Dataset(**kw)

    def take(self, index) -> "Dataset":
        """Row subset (or permutation) of the dataset."""
        index = np.asarray(index)
        return Dataset(
            self.features[index],
            self.feature_names,
            None if self.truth is None else self.truth[index],
            None if self.sequences is None else tuple(self.sequences[i] for i in index),
        )

    def equals(self, other: "Dataset") -> bool:
        if self.feature_names != other.feature_names:
            return False
        if not np.array_equal(self.features, other.features):
            return False
        if (self.truth is None) != (other.truth is None):
            return False
        if self.truth is not None and not np.array_equal(self.truth, other.truth):
            return False
        if (self.sequences is None) != (other.sequences is None):
            return False
        if self.sequences is not None:
            if len(self.sequences) != len(other.sequences):
                return False
            return all(np.array_equal(a, b) for a, b in zip(self.sequences, other.sequences))
        return True


@dataclass(frozen=True, eq=False)
class ScalingParams:
    """Per-feature affine map ``(x - mean) / std``.

    Constant columns are stored with mean 0 and std 1 so they pass through
    unchanged.
    """

    mean: np.ndarray
    std: np.ndarray
    constant: tuple[bool, ...] = field(default=())

    def apply(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def as_matrix(data) -> np.ndarray:
    """Feature matrix of a Dataset or array-like."""
    if isinstance(data, Dataset):
        return data.features
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


# --------------------------------------------------------------------------
# CSV


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
        if isinstance(data, str):
            return io.StringIO(data)
    return io.StringIO(data.decode("utf-8-sig"))


def _label_values(cells: list[str], column: str) -> np.ndarray:
    try:
        return np.array([int(c) for c in cells], dtype=np.int64)
    except ValueError:
        pass
    try:
        vals = [float(c) for c in cells]
        if all(v.is_integer() for v in vals):
            return np.array(vals, dtype=np.int64)
    except ValueError:
        pass
    # categorical labels: codes in order of first appearance
    codes: dict[str, int] = {}
    return np.array([codes.setdefault(c, len(codes)) for c in cells], dtype=np.int64)


def load_csv_columns(source, label_columns: Sequence[str] = ()) -> tuple[Dataset, dict[str, np.ndarray]]:
    """Parse a CSV file, splitting off integer label columns.

    Returns the feature Dataset (without truth) and a mapping from each
    requested label column to its integer labels.
    """
    reader = csv.reader(_open_text(source))
    rows = [r for r in reader if r]
    if not rows:
        raise DataError("empty CSV file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError("CSV file has a header but no data rows")
    for col in label_columns:
        if col not in header:
            raise DataError(f"label column '{col}' not in header {header}")
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DataError(f"row {r} has {len(row)} cells, header has {len(header)}")

    label_idx = {header.index(c): c for c in label_columns}
    feat_idx = [j for j in range(len(header)) if j not in label_idx]
    X = np.empty((len(body), len(feat_idx)))
    for r, row in enumerate(body, start=1):
        for out_j, j in enumerate(feat_idx):
            cell = row[j].strip()
            try:
                X[r - 1, out_j] = float(cell)
            except ValueError:
                raise DataError(f"row {r}, column '{header[j]}': cannot parse {cell!r} as a number") from None
            if not math.isfinite(X[r - 1, out_j]):
                raise DataError(f"row {r}, column '{header[j]}': non-finite value {cell!r}")
    labels = {c: _label_values([row[j].strip() for row in body], c) for j, c in label_idx.items()}
    return Dataset(X, [header[j] for j in feat_idx]), labels


def load_csv(source: BinaryIO | bytes | str | PathLike, label_column: str | None = None) -> Dataset:
    """Read a headered, comma-separated numeric table.

    Data rows are numbered from 1 in error messages (the header is row 0).
    """
    cols = (label_column,) if label_column is not None else ()
    ds, labels = load_csv_columns(source, cols)
    if label_column is None:
        return ds
    return ds.replace(truth=labels[label_column])


def write_csv(ds: Dataset, target, label_column: str = "cluster", labels=None) -> None:
    """Write features plus a trailing integer label column (truth by default)."""
    labels = ds.truth if labels is None else np.asarray(labels)
    header = list(ds.feature_names)
    if labels is not None:
        if label_column in header:
            raise DataError(f"label column '{label_column}' clashes with a feature name")
        header.append(label_column)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i, row in enumerate(ds.features):
        cells = [repr(float(v)) for v in row]
        if labels is not None:
            cells.append(str(int(labels[i])))
        w.writerow(cells)
    data = buf.getvalue().encode()
    if isinstance(target, (str, PathLike)):
        with open(target, "wb") as fh:
            fh.write(data)
    else:
        target.write(data)


# --------------------------------------------------------------------------
# scaling


def standardize(ds: Dataset) -> tuple[Dataset, ScalingParams]:
    """Zero-mean, unit-variance features using the population std.

    Constant features are left untouched (their std is recorded as 1).
    """
    X = ds.features
    if X.shape[0] < 2:
        raise DataError("standardize needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    mean = np.where(constant, 0.0, mean)
    std = np.where(constant, 1.0, std)
    params = ScalingParams(mean, std, tuple(bool(c) for c in constant))
    return ds.replace(features=params.apply(X)), params


# --------------------------------------------------------------------------
# synthetic generators


def blob_centers(k: int, d: int, separation: float) -> np.ndarray:
    """k centers in R^d with minimum pairwise distance exactly ``separation``.

    Uses scaled basis vectors when k <= d, otherwise the first k points of an
    integer lattice with spacing ``separation``.
    """
    if k <= d:
        C = np.zeros((k, d))
        C[np.arange(k), np.arange(k)] = separation / math.sqrt(2.0)
        return C
    side = 2
    while side ** d < k:
        side += 1
    pts = list(itertools.islice(itertools.product(range(side), repeat=d), k))
    return np.asarray(pts, dtype=float) * separation


def gen_blobs(k: int, per_cluster: int, d: int = 2, separation: float = 10.0, seed: int = 0) -> Dataset:
    """Isotropic unit-variance Gaussian clusters (event-aggregation family)."""
    if k < 1 or per_cluster < 1 or d < 1:
        raise DataError("gen_blobs needs k, per_cluster, d >= 1")
    if separation < 0:
        raise DataError("separation must be >= 0")
    rng = np.random.default_rng(seed)
    centers = blob_centers(k, d, separation)
    truth = np.repeat(np.arange(k), per_cluster)
    X = centers[truth] + rng.standard_normal((k * per_cluster, d))
    return Dataset(X, [f"x{j}" for j in range(d)], truth)


def sequence_archetype(c: int, length: int) -> np.ndarray:
    """Archetype of cluster c: a sinusoid with (c + 1) / 2 cycles over [0, 1]."""
    t = np.linspace(0.0, 1.0, length)
    return np.sin(np.pi * (c + 1) * t)


def _summary(seq: np.ndarray) -> list[float]:
    return [float(seq.mean()), float(seq.std()), float(seq.min()), float(seq.max())]


def gen_event_sequences(k: int, per_cluster: int, base_len: int = 40, noise: float = 0.1,
                        seed: int = 0, warp: float = 0.2) -> Dataset:
    """Time-series family: warped, noisy copies of per-cluster archetypes.

    Each member is its archetype resampled to a random length within
    ``base_len * (1 +/- warp)`` plus Gaussian noise of scale ``noise``.
    Features are (mean, std, min, max) of each sequence.
    """
    if k < 1 or per_cluster < 1:
        raise DataError("gen_event_sequences needs k, per_cluster >= 1")
    if base_len < 2:
        raise DataError("base_len must be >= 2")
    if noise < 0 or warp < 0:
        raise DataError("noise and warp must be >= 0")
    rng = np.random.default_rng(seed)
    seqs, feats, truth = [], [], []
    for c in range(k):
        for _ in range(per_cluster):
            length = base_len
            if warp > 0:
                lo = max(2, int(math.floor(base_len * (1 - warp))))
                hi = max(lo, int(math.ceil(base_len * (1 + warp))))
                length = int(rng.integers(lo, hi + 1))
            s = sequence_archetype(c, length)
            if noise > 0:
                s = s + noise * rng.standard_normal(length)
            seqs.append(s)
            feats.append(_summary(s))
            truth.append(c)
    return Dataset(np.array(feats), ["seq_mean", "seq_std", "seq_min", "seq_max"], truth, seqs)


def _coprime_shifts(stages: int) -> list[int]:
    return [m for m in range(1, stages) if math.gcd(m, stages) == 1]


def transition_matrices(k: int, stages: int, chain: str, rng: np.random.Generator,
                        concentration: float = 0.5) -> np.ndarray:
    """Per-cluster row-stochastic matrices, shape (k, stages, stages)."""
    if chain == "deterministic":
        shifts = _coprime_shifts(stages)
        if k > len(shifts):
            raise DataError(f"deterministic chains support at most {len(shifts)} clusters for {stages} stages")
        T = np.zeros((k, stages, stages))
        for c in range(k):
            T[c, np.arange(stages), (np.arange(stages) + shifts[c]) % stages] = 1.0
        return T
    if chain == "shared":
        one = rng.dirichlet(np.full(stages, concentration), size=stages)
        return np.repeat(one[None], k, axis=0)
    if chain == "dirichlet":
        return rng.dirichlet(np.full(stages, concentration), size=(k, stages))
    raise DataError(f"unknown chain kind {chain!r}; expected dirichlet, deterministic or shared")


def gen_multistage(k: int, per_cluster: int, stages: int = 5, seed: int = 0, walk_len: int = 50,
                   chain: str = "dirichlet") -> Dataset:
    """Multi-stage process family: Markov walks over ``stages`` states.

    Each cluster owns a transition matrix (``chain`` selects random
    Dirichlet rows, deterministic coprime cycles, or one matrix shared by all
    clusters). Features are the flattened transition-count matrix of each
    walk, so every row sums to ``walk_len - 1``.
    """
    if stages < 2:
        raise DataError("gen_multistage needs stages >= 2")
    if k < 1 or per_cluster < 1 or walk_len < 2:
        raise DataError("gen_multistage needs k, per_cluster >= 1 and walk_len >= 2")
    rng = np.random.default_rng(seed)
    T = transition_matrices(k, stages, chain, rng)
    cum = np.cumsum(T, axis=2)
    cum[..., -1] = 1.0
    rows, truth = [], []
    for c in range(k):
        for _ in range(per_cluster):
            counts = np.zeros((stages, stages))
            s = int(rng.integers(stages))
            for u in rng.random(walk_len - 1):
                nxt = int(np.searchsorted(cum[c, s], u, side="right"))
                nxt = min(nxt, stages - 1)
                counts[s, nxt] += 1
                s = nxt
            rows.append(counts.ravel())
            truth.append(c)
    names = [f"t{i}_{j}" for i in range(stages) for j in range(stages)]
    return Dataset(np.array(rows), names, truth)
