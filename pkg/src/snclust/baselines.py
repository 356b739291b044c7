"""Reference clustering baselines: first-neighbor hierarchies and k-means variants."""

from __future__ import annotations

import numpy as np

from .data import FeatureMatrix, GcdDataset
from .errors import ConstraintError
from .snc import ChainConfig, Hierarchy, run_snc


def finch(features: FeatureMatrix, max_levels: int | None = None) -> Hierarchy:
    """Unsupervised first-neighbor hierarchy.

    Shares the selective-neighbor code path: with no labels present only
    the global-argmax rule applies, which is exactly the first-neighbor
    construction.
    """
    ds = GcdDataset(features, None)
    return run_snc(ds, ChainConfig(max_levels=max_levels))


def _chunked_sq_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    xx = (x * x).sum(axis=1)[:, None]
    cc = (centers * centers).sum(axis=1)[None, :]
    return np.maximum(xx + cc - 2.0 * (x @ centers.T), 0.0)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            pick = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining distances zero (duplicates): lowest unpicked index
            pick = int(np.argmax(d2 == 0))
        centers[j] = x[pick]
        d2 = np.minimum(d2, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _reseed_empty(
    x: np.ndarray,
    centers: np.ndarray,
    assign: np.ndarray,
    d2: np.ndarray,
    reseed_pool: np.ndarray,
) -> None:
    """Move each empty cluster's centroid onto the farthest pool point."""
    counts = np.bincount(assign, minlength=centers.shape[0])
    own = d2[np.arange(x.shape[0]), assign].copy()
    for c in np.flatnonzero(counts == 0):
        pool_dist = own[reseed_pool]
        far = int(reseed_pool[int(np.argmax(pool_dist))])
        centers[c] = x[far]
        assign[far] = c
        own[far] = -1.0


def _lloyd(
    x: np.ndarray,
    centers: np.ndarray,
    iters: int,
    pin_idx: np.ndarray | None = None,
    pin_to: np.ndarray | None = None,
    reseed_pool: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Lloyd iterations to an assignment fixed point or the cap.

    Returns the assignment and its inertia. ``pin_idx``/``pin_to`` force
    those instances to fixed centroids every iteration; empty clusters are
    re-seeded from the farthest point of ``reseed_pool``.
    """
    k = centers.shape[0]
    if reseed_pool is None:
        reseed_pool = np.arange(x.shape[0])
    assign = None
    d2 = None
    for _ in range(iters):
        d2 = _chunked_sq_distances(x, centers)
        new_assign = np.argmin(d2, axis=1)
        if pin_idx is not None:
            new_assign[pin_idx] = pin_to
        if reseed_pool.size:
            _reseed_empty(x, centers, new_assign, d2, reseed_pool)
        if pin_idx is not None:
            new_assign[pin_idx] = pin_to
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            mask = assign == c
            if mask.any():
                centers[c] = x[mask].mean(axis=0)
    inertia = float(
        ((x - centers[assign]) ** 2).sum()
    )
    return assign, inertia


def kmeans(
    features: FeatureMatrix, k: int, seed: int = 0, iters: int = 300, n_init: int = 10
) -> np.ndarray:
    """Lloyd's algorithm at community defaults: seeded k-means++ init,
    ``n_init`` restarts keeping the lowest-inertia run, each run iterated to
    an assignment fixed point or the cap. Empty clusters are re-seeded from
    the farthest point."""
    x = features.values.astype(np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ConstraintError(f"k={k} out of range [1, {n}]")
    if iters < 1 or n_init < 1:
        raise ConstraintError("iteration cap and n_init must be >= 1")
    rng = np.random.default_rng(seed)
    best_assign = None
    best_inertia = np.inf
    for _ in range(n_init):
        centers = _kmeanspp(x, k, rng)
        assign, inertia = _lloyd(x, centers, iters)
        if inertia < best_inertia:
            best_inertia = inertia
            best_assign = assign
    return best_assign.astype(np.int64)


def semi_kmeans(
    ds: GcdDataset, k: int, seed: int = 0, iters: int = 300, n_init: int = 10
) -> np.ndarray:
    """Constrained k-means: one centroid per labelled class, initialized to
    the class mean with its labelled members pinned every iteration; the
    remaining centroids are k-means++-seeded from the unlabelled data, with
    ``n_init`` restarts keeping the lowest-inertia run."""
    n_l = ds.n_labelled_classes
    if k < n_l:
        raise ConstraintError(f"k={k} is below the labelled-class count {n_l}")
    if k > ds.n:
        raise ConstraintError(f"k={k} exceeds the instance count {ds.n}")
    if iters < 1 or n_init < 1:
        raise ConstraintError("iteration cap and n_init must be >= 1")
    x = ds.features.values.astype(np.float64)
    labelled = ds.labelled_indices
    unlabelled = ds.unlabelled_indices
    if k - n_l > unlabelled.size:
        raise ConstraintError(
            f"cannot seed {k - n_l} extra centroids from {unlabelled.size} unlabelled instances"
        )
    rng = np.random.default_rng(seed)
    class_means = np.empty((n_l, x.shape[1]), dtype=np.float64)
    for c in range(n_l):
        class_means[c] = x[ds.labels == c].mean(axis=0)
    if k == n_l:
        n_init = 1  # no random component: every restart is identical

    best_assign = None
    best_inertia = np.inf
    for _ in range(n_init):
        centers = np.empty((k, x.shape[1]), dtype=np.float64)
        centers[:n_l] = class_means
        if k > n_l:
            centers[n_l:] = _kmeanspp(x[unlabelled], k - n_l, rng)
        assign, inertia = _lloyd(
            x,
            centers,
            iters,
            pin_idx=labelled,
            pin_to=ds.labels[labelled],
            reseed_pool=unlabelled,
        )
        if inertia < best_inertia:
            best_inertia = inertia
            best_assign = assign
    return best_assign.astype(np.int64)
