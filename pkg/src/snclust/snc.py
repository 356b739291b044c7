"""Selective-neighbor hierarchical clustering.

Each cluster picks at most one outgoing neighbor per level and the
connected components of the resulting graph form the next level:

* Labelled clusters of one class are linked into disjoint chains. A chain
  starts at the lowest-index unvisited cluster and repeatedly extends to
  the most-similar remaining same-class cluster, stopping once it holds
  ``lambda`` clusters (a per-class, per-level cap recomputed from the
  current count of labelled clusters in that class). Chain tails keep no
  neighbor, so no labelled cluster is targeted twice and chains stay
  vertex-disjoint.
* Unlabelled clusters take the globally most-similar other cluster,
  labelled or not.

With no labelled instances this degenerates exactly to first-neighbor
graph clustering. Similarity is the dot product of unit-norm centroids;
every argmax tie resolves to the lowest cluster index, which makes the
whole construction deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .data import GcdDataset
from .errors import ConstraintError
from .graph import build_adjacency, connected_components
from .pairwise import nearest_neighbors

NO_LABEL = -1

_RULES = ("sqrt", "cbrt", "half", "fixed")


class OverclusterWarning(UserWarning):
    """Pseudo-label level has too few clusters relative to the labelled classes."""


@dataclass(frozen=True)
class ChainConfig:
    """Chain-length rule and an optional cap on hierarchy depth."""

    rule: str = "sqrt"
    fixed_len: int | None = None
    max_levels: int | None = None

    def __post_init__(self):
        if self.rule not in _RULES:
            raise ConstraintError(f"unknown chain rule {self.rule!r}, expected one of {_RULES}")
        if self.rule == "fixed":
            if self.fixed_len is None or self.fixed_len < 1:
                raise ConstraintError("rule 'fixed' requires fixed_len >= 1")
        if self.max_levels is not None and self.max_levels < 1:
            raise ConstraintError("max_levels must be >= 1 when set")

    def to_json_dict(self) -> dict:
        return {"rule": self.rule, "fixed_len": self.fixed_len, "max_levels": self.max_levels}


def chain_length(n_l: int, cfg: ChainConfig) -> int:
    """Chain cap for a class with ``n_l`` labelled clusters at the current level."""
    if n_l < 1:
        raise ConstraintError(f"n_l must be >= 1, got {n_l}")
    if cfg.rule == "sqrt":
        root = math.isqrt(n_l)
        return root if root * root == n_l else root + 1
    if cfg.rule == "cbrt":
        root = round(n_l ** (1.0 / 3.0))
        while root**3 > n_l:
            root -= 1
        while (root + 1) ** 3 <= n_l:
            root += 1
        return root if root**3 == n_l else root + 1
    if cfg.rule == "half":
        return (n_l + 1) // 2
    return cfg.fixed_len


@dataclass(frozen=True)
class Cluster:
    """Sorted member indices, unit centroid, and a majority label if any member is labelled."""

    members: np.ndarray
    centroid: np.ndarray
    label: int | None = None

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64)
        if members.size == 0:
            raise ConstraintError("cluster must have at least one member")
        members = np.unique(members)
        members.setflags(write=False)
        object.__setattr__(self, "members", members)
        centroid = np.asarray(self.centroid, dtype=np.float64)
        norm = float(np.linalg.norm(centroid))
        if abs(norm - 1.0) > 1e-4:
            raise ConstraintError(f"cluster centroid norm {norm:.6f} is not unit")
        centroid.setflags(write=False)
        object.__setattr__(self, "centroid", centroid)

    @property
    def size(self) -> int:
        return int(self.members.size)


class Partition:
    """One clustering level: a list of clusters covering all instances.

    Clusters are ordered by their smallest member index. ``assignment``
    maps every instance to its cluster index.
    """

    def __init__(self, clusters: list[Cluster], n_instances: int, level: int):
        if not clusters:
            raise ConstraintError("partition needs at least one cluster")
        self.clusters = list(clusters)
        self.n = int(n_instances)
        self.level = int(level)
        assignment = np.full(self.n, -1, dtype=np.int64)
        total = 0
        for idx, cluster in enumerate(self.clusters):
            assignment[cluster.members] = idx
            total += cluster.size
        if total != self.n or (assignment < 0).any():
            raise ConstraintError("clusters do not partition the instance set")
        assignment.setflags(write=False)
        self.assignment = assignment

    def __len__(self) -> int:
        return len(self.clusters)

    @cached_property
    def centroid_matrix(self) -> np.ndarray:
        out = np.stack([c.centroid for c in self.clusters])
        out.setflags(write=False)
        return out

    @cached_property
    def label_array(self) -> np.ndarray:
        out = np.array(
            [NO_LABEL if c.label is None else c.label for c in self.clusters], dtype=np.int64
        )
        out.setflags(write=False)
        return out

    @property
    def labelled_cluster_indices(self) -> np.ndarray:
        return np.flatnonzero(self.label_array >= 0)

    @property
    def unlabelled_cluster_indices(self) -> np.ndarray:
        return np.flatnonzero(self.label_array < 0)

    @classmethod
    def singletons(cls, ds: GcdDataset) -> "Partition":
        _require_normalized(ds)
        feats = ds.features.values.astype(np.float64)
        clusters = [
            Cluster(
                members=np.array([i], dtype=np.int64),
                centroid=feats[i],
                label=int(ds.labels[i]) if ds.labels[i] >= 0 else None,
            )
            for i in range(ds.n)
        ]
        return cls(clusters, ds.n, level=0)


@dataclass
class SelectiveNeighborMap:
    """Per-cluster neighbor choice plus chain bookkeeping for the labelled side."""

    kappa: np.ndarray  # (C,) int64, -1 where unset
    chains: list[list[int]]
    chain_id: np.ndarray  # (C,) int64, -1 for unlabelled clusters
    chain_pos: np.ndarray  # (C,) int64, -1 for unlabelled clusters
    lambda_by_class: dict[int, int]


@dataclass
class Hierarchy:
    """Bottom-up stack of partitions; level 0 is the singleton partition."""

    levels: list[Partition]
    chain_cfg: ChainConfig
    lambda_trace: list[dict[int, int]] = field(default_factory=list)

    @property
    def counts(self) -> list[int]:
        return [len(p) for p in self.levels]

    def to_json_dict(self) -> dict:
        return {
            "chain": self.chain_cfg.to_json_dict(),
            "counts": self.counts,
            "lambda_trace": [
                {str(cls): lam for cls, lam in sorted(step.items())} for step in self.lambda_trace
            ],
            "levels": [
                {
                    "level": p.level,
                    "count": len(p),
                    "clusters": [
                        {
                            "members": [int(m) for m in c.members],
                            "label": None if c.label is None else int(c.label),
                        }
                        for c in p.clusters
                    ],
                }
                for p in self.levels
            ],
        }


def _require_normalized(ds: GcdDataset) -> None:
    if not ds.features.normalized:
        raise ConstraintError("features must be l2-normalized first (see l2_normalize)")


def cluster_label(members: np.ndarray, ds: GcdDataset) -> int | None:
    """Majority class among labelled members; ties to the lowest class id."""
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise ConstraintError("empty member set")
    labs = ds.labels[members]
    labs = labs[labs >= 0]
    if labs.size == 0:
        return None
    counts = np.bincount(labs)
    return int(np.argmax(counts))


def select_neighbors(partition: Partition, cfg: ChainConfig) -> SelectiveNeighborMap:
    """Pick each cluster's neighbor: per-class chains for labelled clusters,
    global argmax for unlabelled ones."""
    count = len(partition)
    if count < 2:
        raise ConstraintError("selecting neighbors needs at least 2 clusters")
    labels = partition.label_array
    points = np.ascontiguousarray(partition.centroid_matrix, dtype=np.float32)

    kappa = np.full(count, -1, dtype=np.int64)
    chain_id = np.full(count, -1, dtype=np.int64)
    chain_pos = np.full(count, -1, dtype=np.int64)
    chains: list[list[int]] = []
    lambda_by_class: dict[int, int] = {}

    for cls in np.unique(labels[labels >= 0]):
        cls_clusters = np.flatnonzero(labels == cls)  # ascending
        lam = chain_length(cls_clusters.size, cfg)
        lambda_by_class[int(cls)] = lam
        in_pool = np.ones(cls_clusters.size, dtype=bool)
        for start_local in range(cls_clusters.size):
            if not in_pool[start_local]:
                continue
            in_pool[start_local] = False
            chain = [int(cls_clusters[start_local])]
            cursor = chain[0]
            while len(chain) < lam:
                pool_local = np.flatnonzero(in_pool)
                if pool_local.size == 0:
                    break
                sims = points[cls_clusters[pool_local]] @ points[cursor]
                best_local = pool_local[int(np.argmax(sims))]
                pick = int(cls_clusters[best_local])
                in_pool[best_local] = False
                kappa[cursor] = pick
                chain.append(pick)
                cursor = pick
            cid = len(chains)
            for pos, member in enumerate(chain):
                chain_id[member] = cid
                chain_pos[member] = pos
            chains.append(chain)

    unlabelled = np.flatnonzero(labels < 0)
    if unlabelled.size:
        kappa[unlabelled] = nearest_neighbors(points, rows=unlabelled)

    return SelectiveNeighborMap(
        kappa=kappa,
        chains=chains,
        chain_id=chain_id,
        chain_pos=chain_pos,
        lambda_by_class=lambda_by_class,
    )


def _coarsen(partition: Partition, component: np.ndarray, ds: GcdDataset) -> Partition:
    """Collapse each connected component of clusters into one new cluster."""
    n = partition.n
    instance_comp = component[partition.assignment]
    n_comp = int(component.max()) + 1

    # order new clusters by their smallest constituent instance index
    first_instance = np.full(n_comp, n, dtype=np.int64)
    np.minimum.at(first_instance, instance_comp, np.arange(n))
    order = np.argsort(first_instance, kind="stable")
    rank = np.empty(n_comp, dtype=np.int64)
    rank[order] = np.arange(n_comp)
    new_assignment = rank[instance_comp]

    sort_idx = np.argsort(new_assignment, kind="stable")
    boundaries = np.flatnonzero(np.diff(new_assignment[sort_idx])) + 1
    member_groups = np.split(sort_idx, boundaries)

    feats = ds.features.values.astype(np.float64)
    sums = np.add.reduceat(feats[sort_idx], np.concatenate([[0], boundaries]), axis=0)
    norms = np.linalg.norm(sums, axis=1)
    if (norms == 0.0).any():
        raise ConstraintError("degenerate cluster: member features sum to zero")
    centroids = sums / norms[:, None]

    clusters = [
        Cluster(members=np.sort(group), centroid=centroids[i], label=cluster_label(group, ds))
        for i, group in enumerate(member_groups)
    ]
    return Partition(clusters, n, level=partition.level + 1)


def snc_step(partition: Partition, ds: GcdDataset, cfg: ChainConfig) -> Partition:
    """One hierarchy step: neighbor map, adjacency, components, coarsened partition."""
    neighbor_map = select_neighbors(partition, cfg)
    graph = build_adjacency(neighbor_map.kappa)
    component = connected_components(graph)
    return _coarsen(partition, component, ds)


def run_snc(ds: GcdDataset, cfg: ChainConfig | None = None) -> Hierarchy:
    """Build the full hierarchy, starting from singletons.

    The loop continues while the cluster count exceeds the labelled class
    count, each step strictly reduces the count, and the optional level cap
    is not reached. Every partition, including level 0, is recorded.
    """
    if ds.n < 2:
        raise ConstraintError("clustering needs at least 2 instances")
    cfg = cfg or ChainConfig()
    _require_normalized(ds)
    floor = max(ds.n_labelled_classes, 1)

    partition = Partition.singletons(ds)
    levels = [partition]
    trace: list[dict[int, int]] = []
    while len(partition) > floor:
        if cfg.max_levels is not None and len(levels) >= cfg.max_levels:
            break
        neighbor_map = select_neighbors(partition, cfg)
        graph = build_adjacency(neighbor_map.kappa)
        nxt = _coarsen(partition, connected_components(graph), ds)
        if len(nxt) >= len(partition):
            break  # no progress: only terminal chains remain
        levels.append(nxt)
        trace.append(neighbor_map.lambda_by_class)
        partition = nxt
    return Hierarchy(levels=levels, chain_cfg=cfg, lambda_trace=trace)


def pseudo_labels(hierarchy: Hierarchy, level: int = 3) -> np.ndarray:
    """Cluster assignment of the requested level, clamped to the top.

    Level 0 is the singleton partition and not a valid choice. Warns with
    :class:`OverclusterWarning` when the chosen level has fewer than twice
    as many clusters as labelled classes.
    """
    if level < 1:
        raise ConstraintError("pseudo-label level must be >= 1 (level 0 is singletons)")
    idx = min(level, len(hierarchy.levels) - 1)
    partition = hierarchy.levels[idx]
    base = hierarchy.levels[0].label_array
    n_classes = int(base.max()) + 1 if (base >= 0).any() else 0
    if n_classes and len(partition) < 2 * n_classes:
        warnings.warn(
            f"level {idx} has only {len(partition)} clusters for {n_classes} labelled "
            f"classes; pseudo-labels may be under-clustered",
            OverclusterWarning,
            stacklevel=2,
        )
    return partition.assignment.copy()
