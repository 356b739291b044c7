import math

import numpy as np
import pytest

from snclust import (
    Batch,
    ConstraintError,
    GcdDataset,
    LossConfig,
    build_positive_sets,
    finch,
    pseudo_labels,
    purity,
    refresh_pseudo,
    sup_con_loss,
    total_loss,
    unified_loss,
)

from conftest import random_unit_features


def scalar_loss(emb, positives, scope, tau):
    """Independent per-member recomputation with plain math.exp loops."""
    terms = []
    for i in scope:
        pos = positives[i]
        if not pos:
            continue
        denom = sum(math.exp(float(emb[i] @ emb[n]) / tau) for n in scope if n != i)
        term = -sum(
            math.log(math.exp(float(emb[i] @ emb[q]) / tau) / denom) for q in pos
        ) / len(pos)
        terms.append(term)
    return terms


def make_batch(embeddings, labels, pseudo):
    emb = np.asarray(embeddings, dtype=np.float64)
    return Batch(
        indices=np.arange(emb.shape[0]),
        embeddings=emb,
        labels=np.asarray(labels, dtype=np.int64),
        pseudo=np.asarray(pseudo, dtype=np.int64),
    )


class TestPositiveSets:
    def test_pseudo_sets(self):
        batch = make_batch(np.eye(3), [-1, -1, -1], [0, 0, 1])
        sets = build_positive_sets(batch)
        assert sets.pseudo_sets[0].tolist() == [1]
        assert sets.pseudo_sets[1].tolist() == [0]
        assert sets.pseudo_sets[2].tolist() == []

    def test_true_sets_for_labelled_pair(self):
        batch = make_batch(np.eye(3), [1, 1, -1], [0, 1, 2])
        sets = build_positive_sets(batch)
        assert sets.true_sets[0].tolist() == [1]
        assert sets.true_sets[1].tolist() == [0]
        assert sets.true_sets[2].tolist() == []

    def test_unified_excludes_labelled_pseudo_peers(self):
        # members 0,1 labelled same pseudo cluster; 0's unified set falls back to G
        batch = make_batch(np.eye(3), [0, 1, -1], [7, 7, 8])
        sets = build_positive_sets(batch)
        assert sets.unified_sets[0].tolist() == sets.true_sets[0].tolist() == []
        # labelled member keeps unlabelled pseudo peers plus true-label peers
        batch2 = make_batch(np.eye(3), [0, -1, 0], [7, 7, 9])
        sets2 = build_positive_sets(batch2)
        assert sets2.unified_sets[0].tolist() == [1, 2]
        assert sets2.unified_sets[2].tolist() == [0]  # true-label peer only


class TestSupConLoss:
    def test_uniform_three_member_ln2(self):
        emb = np.tile(np.array([[1.0, 0.0]]), (3, 1))
        batch = make_batch(emb, [-1, -1, -1], [0, 0, 0])
        positives = [np.array([1]), np.array([0]), np.array([0])]
        loss = sup_con_loss(batch, positives, restrict="all", tau=0.1)
        assert loss == pytest.approx(math.log(2.0), abs=1e-9)

    def test_one_positive_one_negative(self):
        emb = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        batch = make_batch(emb, [-1, -1, -1], [0, 0, 1])
        positives = [np.array([1]), np.array([], np.int64), np.array([], np.int64)]
        got = sup_con_loss(batch, positives, restrict="all", tau=0.1)
        want = math.log1p(math.exp(-1.0 / 0.1))
        assert got == pytest.approx(want, abs=1e-6)

    def test_sharper_temperature(self):
        emb = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        batch = make_batch(emb, [-1, -1, -1], [0, 0, 1])
        positives = [np.array([1]), np.array([], np.int64), np.array([], np.int64)]
        got = sup_con_loss(batch, positives, restrict="all", tau=0.07)
        want = math.log1p(math.exp(-1.0 / 0.07))
        assert got == pytest.approx(want, abs=1e-6)

    def test_empty_positive_members_skipped(self):
        emb = np.eye(3)
        batch = make_batch(emb, [-1, -1, -1], [0, 1, 2])
        sets = build_positive_sets(batch)
        assert sup_con_loss(batch, sets.pseudo_sets, restrict="all", tau=0.1) == 0.0


class TestTotalLoss:
    def test_no_labelled_members(self):
        rng = np.random.default_rng(3)
        feats = random_unit_features(rng, 4, 3)
        batch = make_batch(feats.values.astype(np.float64), [-1] * 4, [0, 0, 1, 1])
        sets = build_positive_sets(batch)
        loss_all, loss_sup, combined = total_loss(batch, sets)
        assert loss_sup == 0.0
        assert combined == loss_all > 0.0

    def test_labelled_only_pseudo_empty(self):
        rng = np.random.default_rng(5)
        feats = random_unit_features(rng, 4, 3)
        batch = make_batch(feats.values.astype(np.float64), [0, 0, 1, 1], [0, 1, 2, 3])
        sets = build_positive_sets(batch)
        loss_all, loss_sup, combined = total_loss(batch, sets)
        assert loss_all == 0.0
        assert combined == loss_sup > 0.0

    def test_matches_scalar_recomputation(self):
        rng = np.random.default_rng(11)
        feats = random_unit_features(rng, 4, 5)
        emb = feats.values.astype(np.float64)
        labels = [0, 0, -1, -1]
        pseudo = [0, 1, 0, 1]
        batch = make_batch(emb, labels, pseudo)
        sets = build_positive_sets(batch)
        cfg = LossConfig()
        loss_all, loss_sup, combined = total_loss(batch, sets, cfg)

        p_sets = [s.tolist() for s in sets.pseudo_sets]
        g_sets = [s.tolist() for s in sets.true_sets]
        want_all = sum(scalar_loss(emb, p_sets, range(4), cfg.tau_a))
        want_sup = sum(scalar_loss(emb, g_sets, [0, 1], cfg.tau_s))
        assert loss_all == pytest.approx(want_all, abs=1e-6)
        assert loss_sup == pytest.approx(want_sup, abs=1e-6)
        assert combined == pytest.approx(want_all + want_sup, abs=1e-6)


class TestUnifiedLoss:
    def test_unlabelled_batch_equals_pseudo_loss(self):
        rng = np.random.default_rng(7)
        feats = random_unit_features(rng, 5, 4)
        batch = make_batch(feats.values.astype(np.float64), [-1] * 5, [0, 0, 1, 1, 0])
        sets = build_positive_sets(batch)
        cfg = LossConfig()
        assert unified_loss(batch, sets, cfg) == pytest.approx(
            sup_con_loss(batch, sets.pseudo_sets, restrict="all", tau=cfg.tau_u)
        )

    def test_labelled_batch_reduces_to_true_relations(self):
        rng = np.random.default_rng(9)
        feats = random_unit_features(rng, 4, 4)
        batch = make_batch(feats.values.astype(np.float64), [0, 0, 1, 1], [0, 1, 2, 3])
        sets = build_positive_sets(batch)
        cfg = LossConfig()
        assert unified_loss(batch, sets, cfg) == pytest.approx(
            sup_con_loss(batch, sets.true_sets, restrict="all", tau=cfg.tau_u)
        )

    def test_mixed_batch_scalar_recomputation(self):
        rng = np.random.default_rng(13)
        feats = random_unit_features(rng, 5, 6)
        emb = feats.values.astype(np.float64)
        batch = make_batch(emb, [0, 0, 1, -1, -1], [0, 1, 0, 0, 1])
        sets = build_positive_sets(batch)
        cfg = LossConfig()
        r_sets = [s.tolist() for s in sets.unified_sets]
        terms = scalar_loss(emb, r_sets, range(5), cfg.tau_u)
        assert unified_loss(batch, sets, cfg) == pytest.approx(
            sum(terms) / len(terms), abs=1e-6
        )


class TestLossProperties:
    def test_permutation_invariance(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(3, 10))
            feats = random_unit_features(rng, n, 4)
            emb = feats.values.astype(np.float64)
            labels = rng.integers(-1, 3, size=n)
            if (labels >= 0).any():
                labels[labels >= 0] = np.unique(labels[labels >= 0], return_inverse=True)[1]
            pseudo = rng.integers(0, 3, size=n)
            batch = make_batch(emb, labels, pseudo)
            base = total_loss(batch, build_positive_sets(batch))
            perm = rng.permutation(n)
            shuffled = make_batch(emb[perm], labels[perm], pseudo[perm])
            again = total_loss(shuffled, build_positive_sets(shuffled))
            assert base[2] == pytest.approx(again[2], rel=1e-9, abs=1e-12)

    def test_equal_dots_give_log_scope(self):
        emb = np.tile(np.array([[0.0, 1.0]]), (6, 1))
        batch = make_batch(emb, [-1] * 6, [0] * 6)
        sets = build_positive_sets(batch)
        loss = sup_con_loss(batch, sets.pseudo_sets, restrict="all", tau=0.1)
        assert loss == pytest.approx(math.log(5.0), abs=1e-9)

    def test_better_positive_lowers_loss(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            theta = rng.uniform(0.2, 1.2)
            closer = theta * 0.5
            emb_far = np.array(
                [[1.0, 0.0], [math.cos(theta), math.sin(theta)], [0.0, 1.0]]
            )
            emb_near = np.array(
                [[1.0, 0.0], [math.cos(closer), math.sin(closer)], [0.0, 1.0]]
            )
            positives = [np.array([1]), np.array([], np.int64), np.array([], np.int64)]
            far = sup_con_loss(
                make_batch(emb_far, [-1] * 3, [0, 0, 1]), positives, "all", 0.1
            )
            near = sup_con_loss(
                make_batch(emb_near, [-1] * 3, [0, 0, 1]), positives, "all", 0.1
            )
            assert near < far

    def test_no_overflow_at_low_temperature(self):
        emb = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        batch = make_batch(emb, [-1] * 3, [0, 0, 1])
        positives = [np.array([1]), np.array([0]), np.array([], np.int64)]
        loss = sup_con_loss(batch, positives, restrict="all", tau=0.01)
        assert math.isfinite(loss)


class TestRefreshPseudo:
    def test_blobs_purity(self, blobs10, blobs10_ds):
        assignment = refresh_pseudo(blobs10_ds, level=3)
        assert purity(assignment, blobs10.truth) >= 0.95

    def test_all_unlabelled_matches_baseline_level(self, blobs10):
        from snclust import GcdDataset

        ds = GcdDataset(blobs10.features, None)
        got = refresh_pseudo(ds, level=3)
        want = pseudo_labels(finch(blobs10.features), 3)
        assert np.array_equal(got, want)

    def test_level_zero_error(self, blobs10_ds):
        with pytest.raises(ConstraintError):
            refresh_pseudo(blobs10_ds, level=0)
