"""Clustering of epochs into market states.

Epoch features are the raw distinct entries of each coarse-grained matrix
(no standardization, Euclidean distance; entries already share the [-1, 1]
scale).  States are relabeled 1..k in ascending order of their members' mean
average correlation, so "state 1" is always the calmest and "state k" the
most correlated regime.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .coarse import CGMatrix
from .errors import ValidationError
from .stats import EpochSeries, average_correlation, series_pearson


def vectorize(m: Union[CGMatrix, np.ndarray]) -> np.ndarray:
    """Distinct entries (upper triangle incl. diagonal) in row-major order.

    A 2x2 matrix maps to (x, y, z); a 10x10 matrix to 55 components.
    """
    v = m.values if isinstance(m, CGMatrix) else np.asarray(m, dtype=np.float64)
    return v[np.triu_indices(v.shape[0])].copy()


def devectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`: rebuild the symmetric matrix."""
    vec = np.asarray(vec, dtype=np.float64)
    b = int(round((np.sqrt(8 * vec.size + 1) - 1) / 2))
    if b * (b + 1) // 2 != vec.size:
        raise ValidationError(f"vector of length {vec.size} is not a packed triangle")
    m = np.zeros((b, b))
    iu = np.triu_indices(b)
    m[iu] = vec
    m[(iu[1], iu[0])] = vec
    return m


@dataclass
class KMeansResult:
    """Raw clustering output of the best restart (labels are 0-based)."""

    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    restart_index: int
    inertia_history: tuple[float, ...] = field(default=())


def _squared_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(c * c, axis=1)[None, :]
        - 2.0 * (x @ c.T)
    )
    return np.maximum(d2, 0.0)


def _kmeanspp_seed(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centroids[j]) ** 2, axis=1))
    return centroids


def _repair_empty(labels: np.ndarray, d2: np.ndarray, k: int) -> np.ndarray:
    # give each empty cluster the point currently farthest from its own centroid
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        own = d2[np.arange(len(labels)), labels].copy()
        own[counts[labels] <= 1] = -np.inf
        victim = int(np.argmax(own))
        counts[labels[victim]] -= 1
        labels[victim] = empty
        counts[empty] += 1
    return labels


def _lloyd(
    x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int
) -> tuple[np.ndarray, np.ndarray, float, int, list[float]]:
    centroids = _kmeanspp_seed(x, k, rng)
    labels: np.ndarray | None = None
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _squared_distances(x, centroids)
        new_labels = _repair_empty(np.argmin(d2, axis=1), d2, k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centroids[j] = x[labels == j].mean(axis=0)
        history.append(float(np.sum((x - centroids[labels]) ** 2)))
    assert labels is not None
    return labels, centroids, history[-1], n_iter, history


def kmeans(
    features: Union[Sequence[np.ndarray], np.ndarray],
    k: int,
    seed: int,
    restarts: int = 100,
    max_iter: int = 300,
) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding and independent restarts.

    Runs ``restarts`` seeded restarts and keeps the best inertia, breaking
    ties by restart index so the result is schedule-independent.  Iteration
    stops when assignments stabilize or after ``max_iter`` rounds; an empty
    cluster seizes the point farthest from its current centroid.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("features must be a 2-d array of epoch vectors")
    n = x.shape[0]
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValidationError(f"{n} points cannot form {k} clusters")
    if restarts < 1:
        raise ValidationError(f"restarts must be >= 1, got {restarts}")
    if np.unique(x, axis=0).shape[0] < k:
        raise ValidationError(
            f"only {np.unique(x, axis=0).shape[0]} distinct points; "
            f"{k} distinct centroids are impossible"
        )
    best: KMeansResult | None = None
    for ridx, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        labels, centroids, inertia, n_iter, history = _lloyd(
            x, k, np.random.default_rng(child), max_iter
        )
        if best is None or (inertia, ridx) < (best.inertia, best.restart_index):
            best = KMeansResult(
                labels=labels,
                centroids=centroids,
                inertia=inertia,
                n_iter=n_iter,
                restart_index=ridx,
                inertia_history=tuple(history),
            )
    assert best is not None
    return best


@dataclass
class StateSequence:
    """Per-epoch market-state labels in 1..k, ordered by average correlation."""

    labels: np.ndarray
    k: int
    centroids: np.ndarray
    state_avg_corr: np.ndarray
    state_sigma: np.ndarray
    inertia: float
    tie_flagged: bool = False

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.state_avg_corr = np.asarray(self.state_avg_corr, dtype=np.float64)
        self.state_sigma = np.asarray(self.state_sigma, dtype=np.float64)
        if self.labels.min(initial=1) < 1 or self.labels.max(initial=self.k) > self.k:
            raise ValidationError("state labels must lie in 1..k")
        diffs = np.diff(self.state_avg_corr)
        if (diffs < 0).any():
            raise ValidationError("state average correlations must be ascending")
        if (diffs == 0).any() and not self.tie_flagged:
            raise ValidationError("tied state means must be flagged")

    def __len__(self) -> int:
        return len(self.labels)


def order_states(
    raw_labels: np.ndarray,
    avg_corr: Union[EpochSeries, np.ndarray],
    k: int,
    centroids: np.ndarray | None = None,
    inertia: float = float("nan"),
) -> StateSequence:
    """Relabel raw clusters 1..k by ascending mean average correlation.

    Exact ties in cluster means are broken by original cluster id (stable
    sort) and flagged on the result.
    """
    labels0 = np.asarray(raw_labels, dtype=np.int64)
    avg = np.asarray(
        avg_corr.values if isinstance(avg_corr, EpochSeries) else avg_corr,
        dtype=np.float64,
    )
    if labels0.shape != avg.shape:
        raise ValidationError("labels and average-correlation series length mismatch")
    means = np.empty(k)
    sigmas = np.empty(k)
    for c in range(k):
        members = avg[labels0 == c]
        if members.size == 0:
            raise ValidationError(f"cluster {c} is empty")
        means[c] = members.mean()
        sigmas[c] = members.std()
    order = np.argsort(means, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(1, k + 1)
    ordered_means = means[order]
    if centroids is None:
        ordered_centroids = np.empty((k, 0))
    else:
        ordered_centroids = np.asarray(centroids, dtype=np.float64)[order]
    return StateSequence(
        labels=rank[labels0],
        k=k,
        centroids=ordered_centroids,
        state_avg_corr=ordered_means,
        state_sigma=sigmas[order],
        inertia=float(inertia),
        tie_flagged=bool((np.diff(ordered_means) == 0).any()),
    )


def cluster_epochs(
    matrices: Sequence[CGMatrix],
    k: int,
    seed: int,
    restarts: int = 100,
    standardize: bool = False,
) -> StateSequence:
    """Vectorize, cluster, and order a list of CG matrices in one call.

    Features are the raw matrix entries by default; ``standardize`` switches
    to per-component z-scores (constant components are left untouched).
    """
    features = np.asarray([vectorize(m) for m in matrices])
    if standardize:
        std = features.std(axis=0)
        std[std == 0] = 1.0
        features = (features - features.mean(axis=0)) / std
    avg = np.asarray([average_correlation(m) for m in matrices])
    raw = kmeans(features, k, seed=seed, restarts=restarts)
    return order_states(raw.labels, avg, k, centroids=raw.centroids, inertia=raw.inertia)


@dataclass
class StateMatrix:
    """Element-wise mean CG matrix of one state's member epochs."""

    state: int
    values: np.ndarray
    pair_counts: np.ndarray
    mean_corr: float
    sigma_corr: float
    n_members: int


def state_mean_matrices(
    labels: Union[StateSequence, np.ndarray],
    matrices: Sequence[CGMatrix],
) -> list[StateMatrix]:
    """Per-state mean matrix plus the mean and spread of member correlations."""
    lab = np.asarray(labels.labels if isinstance(labels, StateSequence) else labels)
    if len(lab) != len(matrices):
        raise ValidationError("labels and matrices length mismatch")
    k = int(lab.max(initial=0))
    stack = np.asarray([m.values for m in matrices])
    avg = np.asarray([average_correlation(m) for m in matrices])
    out = []
    for s in range(1, k + 1):
        members = np.flatnonzero(lab == s)
        if members.size == 0:
            raise ValidationError(f"state {s} has no member epochs")
        out.append(
            StateMatrix(
                state=s,
                values=stack[members].mean(axis=0),
                pair_counts=matrices[members[0]].pair_counts.copy(),
                mean_corr=float(avg[members].mean()),
                sigma_corr=float(avg[members].std()),
                n_members=int(members.size),
            )
        )
    return out


@dataclass
class SimMatrix:
    """Epoch-by-epoch distance matrix over a strided epoch subset."""

    values: np.ndarray
    stride: int
    epoch_index: tuple[int, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if np.abs(np.diag(v)).max(initial=0.0) != 0.0:
            raise ValidationError("similarity matrix diagonal must be zero")
        if v.size and v.min() < 0:
            raise ValidationError("similarity entries must be non-negative")
        if np.abs(v - v.T).max(initial=0.0) > 0:
            raise ValidationError("similarity matrix must be symmetric")
        self.values = v


def similarity_matrix(
    matrices: Sequence[CGMatrix], stride: int = 1, metric: str = "l1"
) -> SimMatrix:
    """Pairwise distance between epochs sampled every ``stride``.

    The default metric is the mean absolute difference over distinct matrix
    positions; ``metric="l2"`` uses the root mean square difference instead.
    """
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    if metric not in ("l1", "l2"):
        raise ValidationError(f"unknown similarity metric {metric!r}")
    sampled = list(matrices)[::stride]
    feats = np.asarray([vectorize(m) for m in sampled])
    e = feats.shape[0]
    values = np.zeros((e, e))
    for i in range(e):
        diff = feats - feats[i]
        if metric == "l1":
            values[i] = np.abs(diff).mean(axis=1)
        else:
            values[i] = np.sqrt((diff**2).mean(axis=1))
    values = np.maximum(values, values.T)
    np.fill_diagonal(values, 0.0)
    return SimMatrix(
        values=values,
        stride=stride,
        epoch_index=tuple(m.epoch_index for m in sampled),
    )


@dataclass
class AgreementReport:
    """How closely two state labelings of the same epochs agree."""

    pearson: float
    adjusted_rand: float


def adjusted_rand_index(a: np.ndarray, b: np.ndarray) -> float:
    """Adjusted Rand index between two label sequences."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError("label sequences must have equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    contingency = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(contingency, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(contingency).sum()
    sum_a = comb2(contingency.sum(axis=1)).sum()
    sum_b = comb2(contingency.sum(axis=0)).sum()
    total = comb2(a.size)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0 if sum_cells == max_index else 0.0
    return float((sum_cells - expected) / (max_index - expected))


def compare_labelings(a: StateSequence, b: StateSequence) -> AgreementReport:
    """Pearson coefficient of the label sequences plus adjusted Rand agreement."""
    if len(a) != len(b):
        raise ValidationError("state sequences cover different epoch counts")
    return AgreementReport(
        pearson=series_pearson(
            a.labels.astype(np.float64), b.labels.astype(np.float64)
        ),
        adjusted_rand=adjusted_rand_index(a.labels, b.labels),
    )
