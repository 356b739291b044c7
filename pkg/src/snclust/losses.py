"""Positive-relation sets and forward evaluation of the contrastive objectives.

For a batch member i the per-member term is

    -(1/|pos(i)|) * sum_{q in pos(i)} log( exp(z_i.z_q / tau)
                                           / sum_{n in scope, n != i} exp(z_i.z_n / tau) )

with the log-sum-exp computed after max subtraction. Members whose
positive set is empty are skipped and counted. The labelled term scores
labelled members against the labelled scope with true-label positives;
the all-data term scores every member against the whole batch with
pseudo-cluster positives; the unified variant uses the combined sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GcdDataset
from .errors import ConstraintError
from .snc import ChainConfig, pseudo_labels, run_snc

_UNIT_TOL = 1e-4


@dataclass(frozen=True)
class LossConfig:
    tau_s: float = 0.07
    tau_a: float = 0.1
    tau_u: float = 0.1

    def __post_init__(self):
        if min(self.tau_s, self.tau_a, self.tau_u) <= 0:
            raise ConstraintError("temperatures must be positive")

    def to_json_dict(self) -> dict:
        return {"tau_s": self.tau_s, "tau_a": self.tau_a, "tau_u": self.tau_u}


@dataclass(frozen=True)
class Batch:
    """A mini-batch of unit-norm embeddings with labels and pseudo ids."""

    indices: np.ndarray
    embeddings: np.ndarray  # (B, d) float64 unit rows
    labels: np.ndarray  # (B,) int64, -1 for unlabelled members
    pseudo: np.ndarray  # (B,) int64 pseudo cluster ids

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        emb = np.asarray(self.embeddings, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        pseudo = np.asarray(self.pseudo, dtype=np.int64)
        if indices.ndim != 1 or indices.size < 2:
            raise ConstraintError("batch needs at least 2 members")
        if emb.shape[0] != indices.size or labels.shape != indices.shape or pseudo.shape != indices.shape:
            raise ConstraintError("batch field lengths disagree")
        norms = np.linalg.norm(emb, axis=1)
        if np.abs(norms - 1.0).max() > _UNIT_TOL:
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise ConstraintError(f"batch embedding {bad} has norm {norms[bad]:.6f}, not unit")
        for name, arr in (("indices", indices), ("embeddings", emb), ("labels", labels), ("pseudo", pseudo)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def labelled_mask(self) -> np.ndarray:
        return self.labels >= 0

    @classmethod
    def from_dataset(cls, ds: GcdDataset, indices: np.ndarray, pseudo: np.ndarray) -> "Batch":
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= ds.n):
            raise ConstraintError("batch index out of range")
        if not ds.features.normalized:
            raise ConstraintError("features must be l2-normalized first")
        return cls(
            indices=indices,
            embeddings=ds.features.values[indices].astype(np.float64),
            labels=ds.labels[indices],
            pseudo=np.asarray(pseudo, dtype=np.int64),
        )


@dataclass
class PositiveSets:
    """Per-member positive index sets (positions within the batch)."""

    true_sets: list[np.ndarray]  # same true label, labelled members only
    pseudo_sets: list[np.ndarray]  # same pseudo cluster, any member
    unified_sets: list[np.ndarray]


def build_positive_sets(batch: Batch) -> PositiveSets:
    b = batch.size
    labelled = batch.labelled_mask
    true_sets: list[np.ndarray] = []
    pseudo_sets: list[np.ndarray] = []
    unified_sets: list[np.ndarray] = []
    members = np.arange(b)
    for i in range(b):
        others = members != i
        if labelled[i]:
            g = np.flatnonzero(others & labelled & (batch.labels == batch.labels[i]))
        else:
            g = np.array([], dtype=np.int64)
        p = np.flatnonzero(others & (batch.pseudo == batch.pseudo[i]))
        if labelled[i]:
            r = np.union1d(g, p[~labelled[p]])
        else:
            r = p
        true_sets.append(g)
        pseudo_sets.append(p)
        unified_sets.append(r)
    return PositiveSets(true_sets=true_sets, pseudo_sets=pseudo_sets, unified_sets=unified_sets)


def _member_terms(
    batch: Batch,
    positives: list[np.ndarray],
    scope_mask: np.ndarray,
    tau: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-member loss terms and the scored mask (nonempty positives, in scope)."""
    if tau <= 0:
        raise ConstraintError("temperature must be positive")
    b = batch.size
    logits = (batch.embeddings @ batch.embeddings.T) / tau
    terms = np.zeros(b)
    scored = np.zeros(b, dtype=bool)
    scope = np.flatnonzero(scope_mask)
    if scope.size < 2:
        if any(scope_mask[i] and positives[i].size for i in range(b)):
            raise ConstraintError("contrastive scope needs at least 2 members")
        return terms, scored
    for i in scope:
        pos = positives[i]
        if pos.size == 0:
            continue
        cand = scope[scope != i]
        row = logits[i, cand]
        peak = row.max()
        lse = peak + np.log(np.exp(row - peak).sum())
        terms[i] = lse - logits[i, pos].mean()
        scored[i] = True
    return terms, scored


def sup_con_loss(
    batch: Batch,
    positives: list[np.ndarray],
    restrict: str = "all",
    tau: float = 0.1,
) -> float:
    """Mean contrastive loss over scored members.

    ``restrict`` is ``"all"`` (score every member against the whole batch)
    or ``"labelled_only"`` (labelled members against the labelled scope).
    Members with no positives are skipped; with nothing to score the mean
    is 0.
    """
    if restrict == "all":
        scope = np.ones(batch.size, dtype=bool)
    elif restrict == "labelled_only":
        scope = batch.labelled_mask
    else:
        raise ConstraintError(f"unknown scope {restrict!r}")
    terms, scored = _member_terms(batch, positives, scope, tau)
    return float(terms[scored].mean()) if scored.any() else 0.0


def total_loss(batch: Batch, sets: PositiveSets, cfg: LossConfig | None = None) -> tuple[float, float, float]:
    """Summed all-data and labelled terms, plus their total.

    Returns ``(loss_all, loss_labelled, total)`` where each component is the
    sum of per-member terms (not the mean).
    """
    cfg = cfg or LossConfig()
    a_terms, a_scored = _member_terms(
        batch, sets.pseudo_sets, np.ones(batch.size, dtype=bool), cfg.tau_a
    )
    s_terms, s_scored = _member_terms(batch, sets.true_sets, batch.labelled_mask, cfg.tau_s)
    loss_all = float(a_terms[a_scored].sum())
    loss_sup = float(s_terms[s_scored].sum())
    return loss_all, loss_sup, loss_all + loss_sup


def unified_loss(batch: Batch, sets: PositiveSets, cfg: LossConfig | None = None) -> float:
    """Mean loss with the combined positive sets over the whole batch."""
    cfg = cfg or LossConfig()
    return sup_con_loss(batch, sets.unified_sets, restrict="all", tau=cfg.tau_u)


def skipped_counts(batch: Batch, sets: PositiveSets) -> dict[str, int]:
    """How many members each term skips for lack of positives."""
    labelled = batch.labelled_mask
    return {
        "all_term": int(sum(1 for p in sets.pseudo_sets if p.size == 0)),
        "labelled_term": int(
            sum(1 for i, g in enumerate(sets.true_sets) if labelled[i] and g.size == 0)
        ),
        "unified": int(sum(1 for r in sets.unified_sets if r.size == 0)),
    }


def refresh_pseudo(ds: GcdDataset, chain: ChainConfig | None = None, level: int = 3) -> np.ndarray:
    """Recluster and return the pseudo assignment at the requested level."""
    hierarchy = run_snc(ds, chain or ChainConfig())
    return pseudo_labels(hierarchy, level)
