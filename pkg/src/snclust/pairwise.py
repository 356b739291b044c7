"""Blocked pairwise dot-product helpers for unit-norm vectors.

Neighbor selection runs in float32 (inputs are float32 features; a dot
product in [-1, 1] needs no more precision to pick an argmax), blocked so
the similarity matrix never fully materializes. Blocks over the query set
are symmetric, so each block pair is computed once and used in both
directions. Ties always resolve to the lowest global index via an
explicit merge rule.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 4096


class _RunningArgmax:
    """Per-row best (value, global column) with lowest-index tie-breaking."""

    def __init__(self, n_rows: int):
        self.value = np.full(n_rows, -np.inf, dtype=np.float32)
        self.index = np.full(n_rows, np.iinfo(np.int64).max, dtype=np.int64)

    def update(self, row_pos: np.ndarray, sims: np.ndarray, col_globals: np.ndarray) -> None:
        # col_globals must be ascending so the block-local argmax already
        # picks the lowest global index within the block
        loc = np.argmax(sims, axis=1)
        r = np.arange(sims.shape[0])
        val = sims[r, loc]
        idx = col_globals[loc]
        cur_val = self.value[row_pos]
        cur_idx = self.index[row_pos]
        take = (val > cur_val) | ((val == cur_val) & (idx < cur_idx))
        upd = row_pos[take]
        self.value[upd] = val[take]
        self.index[upd] = idx[take]


def nearest_neighbors(points: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
    """Per-row argmax dot product over all other points, excluding self.

    ``points`` is the (C, d) matrix; ``rows`` restricts which rows get a
    neighbor (default: all). Returns int64 neighbor indices aligned with
    ``rows``.
    """
    pts = np.ascontiguousarray(points, dtype=np.float32)
    count = pts.shape[0]
    if rows is None:
        rows_in = np.arange(count, dtype=np.int64)
    else:
        rows_in = np.asarray(rows, dtype=np.int64)
    order = np.argsort(rows_in, kind="stable")
    rows_sorted = rows_in[order]

    in_rows = np.zeros(count, dtype=bool)
    in_rows[rows_sorted] = True
    others = np.flatnonzero(~in_rows)

    best = _RunningArgmax(rows_sorted.size)
    blocks = [
        (start, rows_sorted[start : start + _BLOCK])
        for start in range(0, rows_sorted.size, _BLOCK)
    ]

    for bi, (start_i, rows_i) in enumerate(blocks):
        pos_i = np.arange(start_i, start_i + rows_i.size)
        block_i = pts[rows_i]

        # query rows vs non-query columns
        for c0 in range(0, others.size, 2 * _BLOCK):
            cols = others[c0 : c0 + 2 * _BLOCK]
            best.update(pos_i, block_i @ pts[cols].T, cols)

        # diagonal block: mask self before updating
        sims = block_i @ block_i.T
        np.fill_diagonal(sims, -np.inf)
        best.update(pos_i, sims, rows_i)

        # off-diagonal query pairs: one GEMM serves both directions
        for start_j, rows_j in blocks[bi + 1 :]:
            pos_j = np.arange(start_j, start_j + rows_j.size)
            sims = block_i @ pts[rows_j].T
            best.update(pos_i, sims, rows_j)
            best.update(pos_j, np.ascontiguousarray(sims.T), rows_i)

    out = np.empty(rows_in.size, dtype=np.int64)
    out[order] = best.index
    return out
