"""Evaluation metrics: optimal assignment, clustering accuracy, purity, silhouette."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import FeatureMatrix
from .errors import ConstraintError

_BLOCK = 2048


@dataclass(frozen=True)
class AccReport:
    """Clustering accuracy overall and split by seen/unseen true classes."""

    acc_all: float
    acc_seen: float
    acc_unseen: float | None
    mapping: dict[int, int]  # predicted cluster id -> matched class id
    n_eval: int
    n_seen: int
    n_unseen: int

    def to_json_dict(self) -> dict:
        return {
            "acc_all": self.acc_all,
            "acc_seen": self.acc_seen,
            "acc_unseen": self.acc_unseen,
            "n_eval": self.n_eval,
            "n_seen": self.n_seen,
            "n_unseen": self.n_unseen,
            "mapping": {str(k): v for k, v in sorted(self.mapping.items())},
        }

    def to_csv_rows(self) -> list[tuple[str, str]]:
        rows = [
            ("acc_all", repr(self.acc_all)),
            ("acc_seen", repr(self.acc_seen)),
            ("acc_unseen", "" if self.acc_unseen is None else repr(self.acc_unseen)),
            ("n_eval", str(self.n_eval)),
            ("n_seen", str(self.n_seen)),
            ("n_unseen", str(self.n_unseen)),
        ]
        return rows


def hungarian(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost row-to-column permutation of a square matrix.

    Among equally optimal permutations, returns the lexicographically
    smallest one (fixing rows in order, preferring the lowest feasible
    column). That canonical search re-solves shrinking subproblems, so
    keep inputs modest; large callers that only need the optimal value
    use the solver directly.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ConstraintError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.isfinite(cost).all():
        raise ConstraintError("cost matrix must be finite")
    n = cost.shape[0]
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    tol = 1e-9 * max(1.0, abs(best))

    perm = np.full(n, -1, dtype=np.int64)
    free = list(range(n))
    fixed_cost = 0.0
    for i in range(n):
        for pos, c in enumerate(free):
            rest_rows = np.arange(i + 1, n)
            rest_cols = np.array(free[:pos] + free[pos + 1 :], dtype=np.int64)
            total = fixed_cost + cost[i, c]
            if rest_rows.size:
                sub = cost[np.ix_(rest_rows, rest_cols)]
                r, k = linear_sum_assignment(sub)
                total += float(sub[r, k].sum())
            if abs(total - best) <= tol:
                perm[i] = c
                fixed_cost += cost[i, c]
                free.pop(pos)
                break
    return perm, best


def _optimal_mapping(pred: np.ndarray, truth: np.ndarray) -> tuple[dict, np.ndarray, np.ndarray, np.ndarray]:
    """Max-profit matching of predicted clusters to classes over co-occurrence counts."""
    pred_ids, pred_inv = np.unique(pred, return_inverse=True)
    true_ids, true_inv = np.unique(truth, return_inverse=True)
    size = max(pred_ids.size, true_ids.size)
    profit = np.zeros((size, size), dtype=np.int64)
    np.add.at(profit, (pred_inv, true_inv), 1)
    rows, cols = linear_sum_assignment(-profit)
    mapping = {
        int(pred_ids[r]): int(true_ids[c])
        for r, c in zip(rows, cols)
        if r < pred_ids.size and c < true_ids.size
    }
    matched_class = np.full(size, -1, dtype=np.int64)
    matched_class[rows] = cols
    correct = matched_class[pred_inv] == true_inv
    return mapping, correct, pred_ids, true_ids


def clustering_accuracy(
    pred: np.ndarray,
    truth: np.ndarray,
    eval_set: np.ndarray | None = None,
    seen_classes=None,
) -> AccReport:
    """Accuracy under the best cluster-to-class matching, with a single global
    mapping reused for the seen/unseen breakdown."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if eval_set is not None:
        eval_set = np.asarray(eval_set, dtype=np.int64)
        pred = pred[eval_set]
        truth = truth[eval_set]
    if pred.size == 0:
        raise ConstraintError("empty evaluation set")
    if pred.shape != truth.shape:
        raise ConstraintError("pred and truth must have the same length")

    mapping, correct, _, _ = _optimal_mapping(pred, truth)
    acc_all = float(correct.mean())

    if seen_classes is None:
        seen_mask = np.ones(truth.shape, dtype=bool)
    else:
        seen_mask = np.isin(truth, np.asarray(sorted(seen_classes), dtype=np.int64))
    n_seen = int(seen_mask.sum())
    n_unseen = int((~seen_mask).sum())
    acc_seen = float(correct[seen_mask].mean()) if n_seen else acc_all
    acc_unseen = float(correct[~seen_mask].mean()) if n_unseen else None
    return AccReport(
        acc_all=acc_all,
        acc_seen=acc_seen,
        acc_unseen=acc_unseen,
        mapping=mapping,
        n_eval=int(pred.size),
        n_seen=n_seen,
        n_unseen=n_unseen,
    )


def purity(pred: np.ndarray, truth: np.ndarray) -> float:
    """Instance-weighted fraction of each cluster falling in its majority class."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.size == 0:
        raise ConstraintError("empty input")
    _, pred_inv = np.unique(pred, return_inverse=True)
    _, true_inv = np.unique(truth, return_inverse=True)
    counts = np.zeros((pred_inv.max() + 1, true_inv.max() + 1), dtype=np.int64)
    np.add.at(counts, (pred_inv, true_inv), 1)
    return float(counts.max(axis=1).sum() / pred.size)


def silhouette(
    features,
    assignment: np.ndarray,
    sample: tuple[int, int] | None = None,
) -> float:
    """Mean silhouette score under cosine distance (1 - dot) on unit vectors.

    Parameters
    ----------
    features : FeatureMatrix or (n, d) array of unit-norm rows.
    assignment : per-instance cluster id (any integer labelling).
    sample : optional (cap, seed); when n exceeds ``cap`` a seeded uniform
        subsample of instances is scored, each against the full set.

    Instances alone in their cluster score 0, as does the degenerate
    a == b case.
    """
    if isinstance(features, FeatureMatrix):
        values = features.values
    else:
        values = np.asarray(features, dtype=np.float32)
    assignment = np.asarray(assignment, dtype=np.int64)
    n = values.shape[0]
    if assignment.shape != (n,):
        raise ConstraintError("assignment length does not match feature count")
    cluster_ids, inv = np.unique(assignment, return_inverse=True)
    k = cluster_ids.size
    if k < 2:
        raise ConstraintError("silhouette needs at least 2 clusters")
    sizes = np.bincount(inv, minlength=k)

    if sample is not None and sample[0] < n:
        cap, seed = sample
        if cap < 2:
            raise ConstraintError("silhouette sample cap must be >= 2")
        rng = np.random.default_rng(seed)
        scored = np.sort(rng.choice(n, size=cap, replace=False))
    else:
        scored = np.arange(n)

    X = values.astype(np.float64)
    order = np.argsort(inv, kind="stable")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])

    total = 0.0
    for lo in range(0, scored.size, _BLOCK):
        rows = scored[lo : lo + _BLOCK]
        dist = np.maximum(1.0 - X[rows] @ X.T, 0.0)
        sums = np.add.reduceat(dist[:, order], starts, axis=1)
        own = inv[rows]
        r = np.arange(rows.size)
        own_sum = sums[r, own]
        self_dist = dist[r, rows]
        a = np.zeros(rows.size)
        multi = sizes[own] > 1
        a[multi] = (own_sum[multi] - self_dist[multi]) / (sizes[own][multi] - 1)
        means = sums / sizes[None, :]
        means[r, own] = np.inf
        b = means.min(axis=1)
        s = np.zeros(rows.size)
        denom = np.maximum(a, b)
        valid = multi & (denom > 0)
        s[valid] = (b[valid] - a[valid]) / denom[valid]
        total += float(s.sum())
    return total / scored.size
