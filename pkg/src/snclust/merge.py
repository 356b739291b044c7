"""Constrained one-to-one merging of the closest cluster pair.

Each step merges the pair with the highest centroid dot product among
pairs that are not both labelled with different labels. Slots keep their
identity: the merged cluster lives at the smaller index of the pair and
the larger index goes dead, so trace pairs refer to the start partition's
index space. Ties resolve to the lexicographically smallest index pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import GcdDataset
from .errors import ConstraintError
from .snc import NO_LABEL, Cluster, Hierarchy, Partition, cluster_label


@dataclass(frozen=True)
class MergeStep:
    i: int
    j: int
    count: int  # cluster count after this merge


@dataclass
class MergeTrace:
    """Ordered merge steps from ``n_start`` clusters down to ``n_end``."""

    n_start: int
    n_end: int
    steps: list[MergeStep] = field(default_factory=list)

    def to_json_dict(self, scores: dict[int, dict] | None = None) -> dict:
        out = {
            "n_start": self.n_start,
            "n_end": self.n_end,
            "steps": [
                {"pair": [s.i, s.j], "count": s.count}
                | ({"score": scores[s.count]} if scores and s.count in scores else {})
                for s in self.steps
            ],
        }
        return out


class MergeView:
    """Read-only look at the merge state, handed to observers after each step."""

    def __init__(self, merger: "_Merger"):
        self._merger = merger

    @property
    def count(self) -> int:
        return self._merger.count

    @property
    def assignment(self) -> np.ndarray:
        view = self._merger.assignment.view()
        view.setflags(write=False)
        return view

    def to_partition(self) -> Partition:
        return self._merger.to_partition()


class _Merger:
    def __init__(self, partition: Partition, ds: GcdDataset):
        self.ds = ds
        self.level = partition.level
        self.n = partition.n
        self.members: list[np.ndarray] = [c.members for c in partition.clusters]
        self.centroids = partition.centroid_matrix.astype(np.float64).copy()
        self.labels = partition.label_array.copy()
        self.active = np.ones(len(partition), dtype=bool)
        self.assignment = partition.assignment.copy()
        self.count = len(partition)
        sims = self.centroids @ self.centroids.T
        np.fill_diagonal(sims, -np.inf)
        both_labelled = (self.labels[:, None] >= 0) & (self.labels[None, :] >= 0)
        different = self.labels[:, None] != self.labels[None, :]
        sims[both_labelled & different] = -np.inf
        self.sims = sims

    def closest_pair(self) -> tuple[int, int]:
        flat = int(np.argmax(self.sims))
        i, j = divmod(flat, self.sims.shape[1])
        if not np.isfinite(self.sims[i, j]):
            raise ConstraintError(
                "no mergeable pair left: all remaining clusters carry distinct labels"
            )
        return (i, j) if i < j else (j, i)

    def merge(self, i: int, j: int) -> None:
        union = np.sort(np.concatenate([self.members[i], self.members[j]]))
        feats = self.ds.features.values[union].astype(np.float64)
        summed = feats.sum(axis=0)
        norm = float(np.linalg.norm(summed))
        if norm == 0.0:
            raise ConstraintError("degenerate merge: member features sum to zero")
        centroid = summed / norm
        label = cluster_label(union, self.ds)

        self.members[i] = union
        self.members[j] = None
        self.centroids[i] = centroid
        self.labels[i] = NO_LABEL if label is None else label
        self.active[j] = False
        self.assignment[self.assignment == j] = i
        self.count -= 1

        self.sims[j, :] = -np.inf
        self.sims[:, j] = -np.inf
        row = self.centroids @ centroid
        row[~self.active] = -np.inf
        row[i] = -np.inf
        if self.labels[i] >= 0:
            forbidden = (self.labels >= 0) & (self.labels != self.labels[i])
            row[forbidden] = -np.inf
        self.sims[i, :] = row
        self.sims[:, i] = row

    def to_partition(self) -> Partition:
        clusters = [
            Cluster(
                members=self.members[s],
                centroid=self.centroids[s],
                label=None if self.labels[s] < 0 else int(self.labels[s]),
            )
            for s in np.flatnonzero(self.active)
        ]
        return Partition(clusters, self.n, level=self.level)


def find_start_level(hierarchy: Hierarchy, n_o: int) -> int:
    """Deepest level whose cluster count still exceeds ``n_o`` (top as fallback)."""
    counts = hierarchy.counts
    if not counts:
        raise ConstraintError("empty hierarchy")
    if n_o >= counts[0]:
        raise ConstraintError(f"n_o={n_o} must be below the singleton count {counts[0]}")
    for t in range(len(counts) - 1):
        if counts[t] > n_o and counts[t + 1] <= n_o:
            return t
    return len(counts) - 1


def one_to_one_merge(
    partition: Partition,
    ds: GcdDataset,
    n_e: int,
    observer: Callable[[MergeView], None] | None = None,
) -> tuple[Partition, MergeTrace]:
    """Merge the closest allowed pair until ``n_e`` clusters remain.

    Clusters carrying different labels never merge, so ``n_e`` cannot go
    below the number of distinct cluster labels present. The observer, if
    given, is invoked after every merge with the current state.
    """
    count = len(partition)
    if n_e > count:
        raise ConstraintError(f"target {n_e} exceeds current cluster count {count}")
    labels = partition.label_array
    label_floor = int(np.unique(labels[labels >= 0]).size)
    if n_e < label_floor:
        raise ConstraintError(
            f"target {n_e} is below the labelled-class floor {label_floor}"
        )
    trace = MergeTrace(n_start=count, n_end=n_e)
    if n_e == count:
        return partition, trace

    merger = _Merger(partition, ds)
    view = MergeView(merger)
    while merger.count > n_e:
        i, j = merger.closest_pair()
        merger.merge(i, j)
        trace.steps.append(MergeStep(i=i, j=j, count=merger.count))
        if observer is not None:
            observer(view)
    return merger.to_partition(), trace
