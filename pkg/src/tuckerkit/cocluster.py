"""Tensor block models: expansion, exact factor form, clustering, error metrics.

Cluster assignments are carried as 0-based integer label vectors; the
equivalent 0/1 assignment matrix (one 1 per row) is available through
:func:`membership_matrix`. On disk, memberships serialize as one 1-based
cluster index per line.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from .decomposition import hooi, one_step_hooi, st_hosvd, t_hosvd
from .linalg import as_rng, svd_r
from .tensor import check_tensor, matricize, mode_product

__all__ = [
    "UnsupportedClusterCount",
    "membership_matrix",
    "check_labels",
    "balanced_labels",
    "block_expand",
    "block_tucker",
    "kmeans_rows",
    "cocluster",
    "misclassification_error",
    "worst_case_error",
    "write_memberships",
    "read_memberships",
]

ALGORITHMS = {
    "hooi": hooi,
    "ohooi": one_step_hooi,
    "thosvd": lambda X, ranks, **kw: t_hosvd(X, ranks),
    "sthosvd": lambda X, ranks, **kw: st_hosvd(X, ranks),
}


class UnsupportedClusterCount(ValueError):
    """Raised when a metric requires exhaustive permutation search beyond reach."""


def check_labels(labels, n_clusters: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels must be a nonempty vector")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be integers")
    if labels.min() < 0 or labels.max() >= n_clusters:
        raise ValueError(f"labels must lie in [0, {n_clusters})")
    return labels.astype(np.int64)


def membership_matrix(labels, n_clusters: int) -> np.ndarray:
    """0/1 assignment matrix with exactly one 1 per row."""
    labels = check_labels(labels, n_clusters)
    out = np.zeros((labels.size, n_clusters))
    out[np.arange(labels.size), labels] = 1.0
    return out


def balanced_labels(p: int, r: int, rng=None) -> np.ndarray:
    """Row ``i`` starts in cluster ``i % r``; positions are then shuffled."""
    if r > p:
        raise ValueError(f"cannot spread {r} clusters over {p} rows")
    labels = np.arange(p, dtype=np.int64) % r
    as_rng(rng).shuffle(labels)
    return labels


def block_expand(B, memberships) -> np.ndarray:
    """Expand a core ``B`` through per-mode assignments: entry = core at the assigned block."""
    B = check_tensor(B)
    if len(memberships) != B.ndim:
        raise ValueError(f"need {B.ndim} membership vectors, got {len(memberships)}")
    T = B
    for mode, labels in enumerate(memberships):
        labels = check_labels(labels, B.shape[mode])
        T = np.take(T, labels, axis=mode)
    return T


def block_tucker(B, memberships):
    """Exact orthonormal-factor form of a block tensor.

    Folds the per-cluster sizes into the core, takes its full decomposition,
    and lifts the rotations through normalized indicator columns. Returns
    ``(core, factor_list)`` with ``core`` expanded by the factors equal to
    :func:`block_expand` of the inputs.
    """
    B = check_tensor(B)
    d = B.ndim
    if len(memberships) != d:
        raise ValueError(f"need {d} membership vectors, got {len(memberships)}")
    labels = [check_labels(m, B.shape[k]) for k, m in enumerate(memberships)]
    sizes = []
    for k, lab in enumerate(labels):
        counts = np.bincount(lab, minlength=B.shape[k])
        if np.any(counts == 0):
            raise ValueError(f"mode {k} has an empty cluster")
        sizes.append(counts.astype(np.float64))

    weighted = B
    for k, counts in enumerate(sizes):
        weighted = mode_product(weighted, k, np.diag(np.sqrt(counts)))

    rotations = []
    for k in range(d):
        M = matricize(weighted, k)
        svals = np.linalg.svd(M, compute_uv=False)
        if min(M.shape) < B.shape[k] or svals[-1] <= 1e-12 * max(svals[0], 1.0):
            raise ValueError(f"core is rank deficient along mode {k}")
        rotations.append(svd_r(M, B.shape[k]).U)

    core = weighted
    factors = []
    for k in range(d):
        core = mode_product(core, k, rotations[k].T)
        factors.append(rotations[k][labels[k]] / np.sqrt(sizes[k])[labels[k], None])
    return core, factors


def _kmeans_plus_plus(X, k, rng):
    p = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(p)]
    dist2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = dist2.sum()
        if total <= 0:
            centers[j] = X[rng.integers(p)]
        else:
            centers[j] = X[rng.choice(p, p=dist2 / total)]
        dist2 = np.minimum(dist2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(X, centers, max_iters):
    k = centers.shape[0]
    labels = None
    for _ in range(max_iters):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            mask = new_labels == j
            if mask.any():
                centers[j] = X[mask].mean(axis=0)
            else:
                # revive an empty cluster at the point farthest from its center
                far = int(np.argmax(d2[np.arange(len(X)), new_labels]))
                centers[j] = X[far]
                new_labels[far] = j
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
    objective = float(np.sum((X - centers[labels]) ** 2))
    return labels, centers, objective


def _exchange_refine(X, labels, k, max_rounds=100):
    """Single-point exchange descent (Hartigan style) from a Lloyd fixed point.

    Moving point ``i`` from cluster ``a`` (size ``n_a``) to ``b`` changes the
    objective by ``n_b/(n_b+1) * ||x_i - mu_b||^2 - n_a/(n_a-1) * ||x_i - mu_a||^2``;
    greedy moves escape Lloyd-stable partitions that are not exchange-stable.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    for _ in range(max_rounds):
        improved = False
        for i in range(len(X)):
            a = labels[i]
            if counts[a] <= 1:
                continue
            mu_a = sums[a] / counts[a]
            loss = counts[a] / (counts[a] - 1) * float(np.sum((X[i] - mu_a) ** 2))
            best_delta, best_b = -1e-15, -1
            for b in range(k):
                if b == a:
                    continue
                mu_b = sums[b] / counts[b]
                gain = counts[b] / (counts[b] + 1) * float(np.sum((X[i] - mu_b) ** 2))
                if gain - loss < best_delta:
                    best_delta, best_b = gain - loss, b
            if best_b >= 0:
                sums[a] -= X[i]
                counts[a] -= 1
                sums[best_b] += X[i]
                counts[best_b] += 1
                labels[i] = best_b
                improved = True
        if not improved:
            break
    centers = sums / counts[:, None]
    objective = float(np.sum((X - centers[labels]) ** 2))
    return labels, centers, objective


def kmeans_rows(X, k: int, restarts: int = 20, max_iters: int = 300, rng=None):
    """Cluster the rows of ``X`` into ``k`` groups.

    Each of the ``restarts`` runs seeds with k-means++, iterates Lloyd steps
    (empty clusters reseeded to the farthest point), then polishes with
    single-point exchange moves; the best run wins. Deterministic for a fixed
    ``rng`` seed. Returns ``(labels, centers, objective)`` with ``objective``
    the exact sum of squared distances at the returned pair.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a matrix of row vectors")
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"cluster count {k} outside [1, {X.shape[0]}]")
    rng = as_rng(rng)
    best = None
    for _ in range(max(1, restarts)):
        centers = _kmeans_plus_plus(X, k, rng)
        labels, centers, objective = _lloyd(X, centers.copy(), max_iters)
        labels, centers, objective = _exchange_refine(X, labels, k)
        if best is None or objective < best[2]:
            best = (labels, centers, objective)
    return best


def cocluster(
    X,
    ranks,
    *,
    algorithm: str = "hooi",
    init="sthosvd",
    t_max: int = 50,
    kmeans_restarts: int = 20,
    kmeans_max_iters: int = 300,
    random_state=None,
):
    """Recover per-mode cluster assignments of a noisy block tensor.

    Fits a low multilinear rank decomposition (singleton groups) and runs
    :func:`kmeans_rows` on each factor. Returns ``(labels_per_mode, fit)``.
    """
    X = check_tensor(X)
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    rng = as_rng(random_state)
    fit = ALGORITHMS[algorithm](X, ranks, init=init, t_max=t_max)
    memberships = []
    for gi, U in enumerate(fit.factors):
        labels, _, _ = kmeans_rows(
            U, fit.groups.ranks[gi], restarts=kmeans_restarts, max_iters=kmeans_max_iters, rng=rng
        )
        memberships.append(labels)
    return memberships, fit


def _confusion(pred, true, r):
    counts = np.zeros((r, r), dtype=np.int64)
    np.add.at(counts, (pred, true), 1)
    return counts


def _checked_pair(pred, true, n_clusters):
    pred = check_labels(pred, n_clusters)
    true = check_labels(true, n_clusters)
    if pred.shape != true.shape:
        raise ValueError("label vectors differ in length")
    return pred, true


def misclassification_error(pred, true, n_clusters: int) -> float:
    """Relabeling-minimized fraction of changed assignment-matrix entries.

    Each misassigned row flips two 0/1 entries, so the value lies in
    ``[0, 2]``. Exhaustive permutation search for up to 8 clusters; the
    assignment-linear objective makes Hungarian matching exact above that.
    """
    pred, true = _checked_pair(pred, true, n_clusters)
    counts = _confusion(pred, true, n_clusters)
    p = pred.size
    if n_clusters <= 8:
        matched = max(
            sum(counts[a, perm[a]] for a in range(n_clusters))
            for perm in itertools.permutations(range(n_clusters))
        )
    else:
        rows, cols = linear_sum_assignment(-counts)
        matched = int(counts[rows, cols].sum())
    return 2.0 * (p - matched) / p


def worst_case_error(pred, true, n_clusters: int) -> float:
    """Worst per-true-cluster relative misclassification, minimized over relabelings.

    The min-max objective is not assignment-linear, so only the exhaustive
    search over at most ``8!`` permutations is exact; larger cluster counts
    raise :class:`UnsupportedClusterCount`.
    """
    pred, true = _checked_pair(pred, true, n_clusters)
    if n_clusters > 8:
        raise UnsupportedClusterCount(
            f"worst-case error needs exhaustive search; {n_clusters} clusters exceed 8"
        )
    sizes = np.bincount(true, minlength=n_clusters)
    if np.any(sizes == 0):
        raise ValueError("every true cluster must be nonempty")
    counts = _confusion(pred, true, n_clusters)
    cluster_ids = np.arange(n_clusters)
    best = None
    for perm in itertools.permutations(range(n_clusters)):
        # true cluster j keeps the rows whose prediction relabels onto j
        inv = np.argsort(np.asarray(perm))
        matched = counts[inv, cluster_ids]
        value = float(np.max(2.0 * (sizes - matched) / sizes))
        if best is None or value < best:
            best = value
    return best


def write_memberships(path, labels) -> None:
    """One 1-based cluster index per line."""
    labels = np.asarray(labels)
    with open(path, "w", encoding="utf-8") as fh:
        for v in labels:
            fh.write(f"{int(v) + 1}\n")


def read_memberships(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        values = [int(line.strip()) for line in fh if line.strip()]
    if any(v < 1 for v in values):
        raise ValueError("membership indices are 1-based and must be >= 1")
    return np.asarray(values, dtype=np.int64) - 1
