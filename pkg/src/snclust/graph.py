"""Neighbor-map adjacency and connected components.

The graph over n nodes is defined by a per-node optional neighbor index
kappa: an undirected edge (i, j) exists iff j == kappa[i], or
kappa[j] == i, or kappa[i] == kappa[j] (both present). Connectivity is
fully determined by the direct i--kappa[i] links, so components are
extracted with union-find without materializing the shared-neighbor
cliques; the full edge set is available lazily for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError

NO_NEIGHBOR = -1


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return int(i)

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]


@dataclass(frozen=True)
class NeighborGraph:
    """A neighbor map plus its derived undirected edge set."""

    node_count: int
    kappa: np.ndarray  # (n,) int64, NO_NEIGHBOR where unset

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Full derived edge set including shared-neighbor pairs, sorted."""
        pairs: set[tuple[int, int]] = set()
        kappa = self.kappa
        for i in np.flatnonzero(kappa >= 0):
            j = int(kappa[i])
            pairs.add((min(int(i), j), max(int(i), j)))
        # shared-neighbor clause: kappa[i] == kappa[j]
        targets, inverse = np.unique(kappa[kappa >= 0], return_inverse=True)
        sources = np.flatnonzero(kappa >= 0)
        for t in range(targets.size):
            group = sources[inverse == t]
            for a in range(group.size):
                for b in range(a + 1, group.size):
                    pairs.add((int(group[a]), int(group[b])))
        return sorted(pairs)


def build_adjacency(kappa) -> NeighborGraph:
    """Validate a neighbor map and wrap it as a graph."""
    kappa = np.asarray(kappa, dtype=np.int64)
    n = kappa.shape[0]
    set_mask = kappa != NO_NEIGHBOR
    if set_mask.any():
        vals = kappa[set_mask]
        if vals.min() < 0 or vals.max() >= n:
            bad = int(np.flatnonzero(set_mask & ((kappa < NO_NEIGHBOR) | (kappa >= n)))[0])
            raise ConstraintError(f"neighbor index {kappa[bad]} of node {bad} out of range")
        self_ref = np.flatnonzero(kappa == np.arange(n))
        if self_ref.size:
            raise ConstraintError(f"node {int(self_ref[0])} is its own neighbor")
    return NeighborGraph(node_count=n, kappa=kappa.copy())


def connected_components(graph: NeighborGraph) -> np.ndarray:
    """Component id per node; ids ordered by each component's smallest node."""
    n = graph.node_count
    uf = UnionFind(n)
    kappa = graph.kappa
    for i in np.flatnonzero(kappa >= 0):
        uf.union(int(i), int(kappa[i]))
    ids = np.empty(n, dtype=np.int64)
    root_to_id: dict[int, int] = {}
    for i in range(n):
        root = uf.find(i)
        ids[i] = root_to_id.setdefault(root, len(root_to_id))
    return ids
