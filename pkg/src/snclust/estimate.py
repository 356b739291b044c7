"""Class-number estimation and label assignment over the hierarchy.

A joint reference score ranks candidate granularities: held-out labelled
accuracy times unlabelled silhouette, each min-max scaled within the
decision being made (first across hierarchy levels, then across merge
steps). The merge scan walks the band between the levels adjacent to the
best-scoring one and returns the cluster count with the maximum score.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import GcdDataset, LabelledSplit, split_labelled
from .errors import ConstraintError
from .merge import MergeView, find_start_level, one_to_one_merge
from .metrics import clustering_accuracy, silhouette
from .snc import ChainConfig, Partition, run_snc


@dataclass(frozen=True)
class EstimateConfig:
    ratio: float = 0.8
    seed: int = 0
    silhouette_cap: int = 5000
    band_multiplier: float | None = None  # None = no cap on the scan band

    def __post_init__(self):
        if self.band_multiplier is not None and self.band_multiplier < 2:
            raise ConstraintError("band_multiplier must be >= 2 when set")
        if self.silhouette_cap < 2:
            raise ConstraintError("silhouette_cap must be >= 2")

    def to_json_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "seed": self.seed,
            "silhouette_cap": self.silhouette_cap,
            "band_multiplier": self.band_multiplier,
        }


@dataclass
class ReferenceScore:
    """Raw components of the joint score; the scaled product is filled per scan."""

    acc_val: float
    sil_u: float
    s_scaled: float | None = None

    def to_json_dict(self) -> dict:
        return {"acc_val": self.acc_val, "sil_u": self.sil_u, "s_scaled": self.s_scaled}


@dataclass
class KEstimate:
    k: int
    chosen_level: int
    n_e: int
    n_o: int
    level_scores: list[tuple[int, int, ReferenceScore]]  # (level, count, score)
    scan: list[tuple[int, ReferenceScore]] = field(default_factory=list)  # (count, score)
    runtime_ms: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "chosen_level": self.chosen_level,
            "n_e": self.n_e,
            "n_o": self.n_o,
            "levels": [
                {"level": lvl, "count": count} | score.to_json_dict()
                for lvl, count, score in self.level_scores
            ],
            "scan": [
                {"count": count} | score.to_json_dict() for count, score in self.scan
            ],
        }


def _minmax(values: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant series scales to all ones."""
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.ones_like(values)
    return (values - lo) / (hi - lo)


def _score_assignment(
    assignment: np.ndarray,
    n_clusters: int,
    ds: GcdDataset,
    split: LabelledSplit,
    cfg: EstimateConfig,
) -> ReferenceScore:
    if n_clusters < 2:
        raise ConstraintError("reference score undefined for a single-cluster partition")
    acc = clustering_accuracy(assignment, ds.labels, eval_set=split.val_mask).acc_all
    unl = ds.unlabelled_indices
    sil = silhouette(
        ds.features.values[unl],
        assignment[unl],
        sample=(cfg.silhouette_cap, cfg.seed),
    )
    return ReferenceScore(acc_val=acc, sil_u=sil)


def reference_components(
    partition: Partition, ds: GcdDataset, split: LabelledSplit, cfg: EstimateConfig
) -> ReferenceScore:
    """Raw joint-score components for one candidate partition.

    Accuracy is measured on the held-out labelled instances, silhouette on
    the unlabelled ones (subsampled past the configured cap).
    """
    return _score_assignment(partition.assignment, len(partition), ds, split, cfg)


def estimate_k(
    ds: GcdDataset,
    cfg: EstimateConfig | None = None,
    chain: ChainConfig | None = None,
) -> KEstimate:
    """Estimate the number of classes with one clustering run plus a merge scan."""
    cfg = cfg or EstimateConfig()
    chain = chain or ChainConfig()
    if ds.labelled_indices.size == 0:
        raise ConstraintError("estimation needs labelled instances")
    if ds.unlabelled_indices.size == 0:
        raise ConstraintError("estimation needs unlabelled instances")
    started = time.perf_counter()

    split = split_labelled(ds, cfg.ratio, cfg.seed)
    est_labels = np.full(ds.n, -1, dtype=np.int64)
    est_labels[split.train_mask] = ds.labels[split.train_mask]
    ds_est = ds.with_labels(est_labels)

    hierarchy = run_snc(ds_est, chain)
    if len(hierarchy.levels) < 2:
        raise ConstraintError("degenerate hierarchy: clustering produced a single level")

    level_scores: list[tuple[int, int, ReferenceScore]] = []
    for level, partition in enumerate(hierarchy.levels):
        if len(partition) < 2:
            continue
        score = reference_components(partition, ds, split, cfg)
        level_scores.append((level, len(partition), score))
    if not level_scores:
        raise ConstraintError("no level with at least 2 clusters to score")

    accs = _minmax(np.array([s.acc_val for _, _, s in level_scores]))
    sils = _minmax(np.array([s.sil_u for _, _, s in level_scores]))
    chosen_level = -1
    chosen_count = -1
    best = -np.inf
    for (level, count, score), a, s in zip(level_scores, accs, sils):
        score.s_scaled = float(a * s)
        if score.s_scaled > best or (score.s_scaled == best and count < chosen_count):
            best = score.s_scaled
            chosen_level = level
            chosen_count = count
    counts = hierarchy.counts

    if chosen_level == 0:
        raise ConstraintError(
            "reference score peaks at the singleton level: scores are degenerate "
            "(e.g. constant features), no class-number estimate is possible"
        )
    n_o = counts[chosen_level - 1]
    if cfg.band_multiplier is not None:
        n_o = min(n_o, math.ceil(cfg.band_multiplier * counts[chosen_level]))
    n_l = ds.n_labelled_classes
    n_e = counts[chosen_level + 1] if chosen_level + 1 < len(counts) else n_l

    start_level = find_start_level(hierarchy, n_o)
    start = hierarchy.levels[start_level]
    start_labels = start.label_array
    label_floor = int(np.unique(start_labels[start_labels >= 0]).size)
    n_e = max(n_e, label_floor, 2)
    n_e = min(n_e, n_o)

    scan_scores: dict[int, ReferenceScore] = {}

    def observer(view: MergeView) -> None:
        if view.count <= n_o:
            scan_scores[view.count] = _score_assignment(
                view.assignment, view.count, ds, split, cfg
            )

    one_to_one_merge(start, ds_est, n_e, observer=observer)
    if not scan_scores:
        raise ConstraintError("merge scan produced no scored counts")

    scan_counts = sorted(scan_scores, reverse=True)  # merge order: high to low
    accs = _minmax(np.array([scan_scores[c].acc_val for c in scan_counts]))
    sils = _minmax(np.array([scan_scores[c].sil_u for c in scan_counts]))
    k = -1
    best = -np.inf
    for count, a, s in zip(scan_counts, accs, sils):
        scan_scores[count].s_scaled = float(a * s)
        if scan_scores[count].s_scaled > best or (
            scan_scores[count].s_scaled == best and count < k
        ):
            best = scan_scores[count].s_scaled
            k = count

    return KEstimate(
        k=k,
        chosen_level=chosen_level,
        n_e=n_e,
        n_o=n_o,
        level_scores=level_scores,
        scan=[(c, scan_scores[c]) for c in scan_counts],
        runtime_ms=(time.perf_counter() - started) * 1000.0,
    )


def assign_labels(
    ds: GcdDataset, k: int, chain: ChainConfig | None = None
) -> np.ndarray:
    """Cluster assignment with exactly ``k`` clusters.

    Runs the hierarchy, takes the level with the smallest count still above
    ``k`` (or the level with exactly ``k``), and merges down under the
    label constraint.
    """
    chain = chain or ChainConfig()
    if k < ds.n_labelled_classes:
        raise ConstraintError(
            f"k={k} is below the labelled-class floor {ds.n_labelled_classes}"
        )
    if not 1 <= k < ds.n:
        raise ConstraintError(f"k={k} out of range [1, {ds.n})")
    hierarchy = run_snc(ds, chain)
    for partition in hierarchy.levels:
        if len(partition) == k:
            return partition.assignment.copy()
    start = hierarchy.levels[find_start_level(hierarchy, k)]
    merged, _ = one_to_one_merge(start, ds, k)
    return merged.assignment.copy()
