import numpy as np
import pytest

from snclust import (
    ConstraintError,
    EstimateConfig,
    FeatureMatrix,
    GcdDataset,
    assign_labels,
    clustering_accuracy,
    estimate_k,
    reference_components,
    run_snc,
    split_labelled,
)
from snclust.estimate import _minmax

from conftest import unit_rows


class TestMinMax:
    def test_constant_series_scales_to_one(self):
        assert _minmax(np.array([0.4, 0.4, 0.4])).tolist() == [1.0, 1.0, 1.0]

    def test_spans_unit_interval(self):
        scaled = _minmax(np.array([2.0, 5.0, 3.5]))
        assert scaled.min() == 0.0 and scaled.max() == 1.0


class TestReferenceComponents:
    def test_perfect_partition_scores_full_accuracy(self, blobs10, blobs10_ds):
        split = split_labelled(blobs10_ds, 0.8, seed=0)
        hierarchy = run_snc(blobs10_ds)
        # score the ground-truth partition itself
        from snclust import Partition, Cluster

        feats = blobs10_ds.features.values.astype(np.float64)
        clusters = []
        for cls in range(10):
            members = np.flatnonzero(blobs10.truth == cls)
            centroid = feats[members].sum(axis=0)
            centroid /= np.linalg.norm(centroid)
            label = cls if cls < 5 else None
            clusters.append(Cluster(members=members, centroid=centroid, label=label))
        partition = Partition(clusters, blobs10_ds.n, level=1)
        score = reference_components(partition, blobs10_ds, split, EstimateConfig())
        assert score.acc_val == 1.0
        assert score.sil_u > 0.2

    def test_single_cluster_errors(self, blobs10_ds):
        from snclust import Cluster, Partition

        feats = blobs10_ds.features.values.astype(np.float64)
        centroid = feats.sum(axis=0)
        centroid /= np.linalg.norm(centroid)
        partition = Partition(
            [Cluster(members=np.arange(blobs10_ds.n), centroid=centroid, label=0)],
            blobs10_ds.n,
            level=1,
        )
        split = split_labelled(blobs10_ds, 0.8, seed=0)
        with pytest.raises(ConstraintError):
            reference_components(partition, blobs10_ds, split, EstimateConfig())


class TestEstimateK:
    def test_blobs_estimate_in_band(self, blobs10_ds):
        estimate = estimate_k(blobs10_ds)
        assert 8 <= estimate.k <= 12
        assert estimate.n_e <= estimate.k <= estimate.n_o
        counts = [count for count, _ in estimate.scan]
        assert counts == sorted(counts, reverse=True)
        assert estimate.runtime_ms > 0

    def test_deterministic(self, blobs10_ds):
        a = estimate_k(blobs10_ds)
        b = estimate_k(blobs10_ds)
        assert a.k == b.k and a.chosen_level == b.chosen_level
        assert [(c, s.acc_val, s.sil_u) for c, s in a.scan] == [
            (c, s.acc_val, s.sil_u) for c, s in b.scan
        ]

    def test_chosen_level_maximizes_scaled_product(self, blobs10_ds):
        estimate = estimate_k(blobs10_ds)
        scores = {lvl: s.s_scaled for lvl, _, s in estimate.level_scores}
        assert scores[estimate.chosen_level] == max(scores.values())

    def test_band_multiplier_caps_n_o(self, blobs10_ds):
        wide = estimate_k(blobs10_ds, EstimateConfig())
        narrow = estimate_k(blobs10_ds, EstimateConfig(band_multiplier=2.0))
        assert narrow.n_o <= wide.n_o

    def test_requires_labelled_and_unlabelled(self):
        feats = unit_rows(np.eye(6, dtype=np.float32))
        with pytest.raises(ConstraintError):
            estimate_k(GcdDataset(feats, None))
        with pytest.raises(ConstraintError):
            estimate_k(GcdDataset(feats, np.array([0, 0, 1, 1, 2, 2])))

    def test_identical_features_surface_error(self):
        values = np.tile(np.array([[1.0, 0.0, 0.0]], dtype=np.float32), (20, 1))
        feats = FeatureMatrix(values, normalized=True)
        labels = np.full(20, -1, dtype=np.int64)
        labels[:4] = [0, 0, 1, 1]
        with pytest.raises(ConstraintError):
            estimate_k(GcdDataset(feats, labels))


class TestAssignLabels:
    def test_exact_level_shortcut(self, blobs10_ds):
        hierarchy = run_snc(blobs10_ds)
        count = hierarchy.counts[2]
        assignment = assign_labels(blobs10_ds, count)
        assert np.array_equal(assignment, hierarchy.levels[2].assignment)

    def test_blobs_high_accuracy(self, blobs10, blobs10_ds):
        assignment = assign_labels(blobs10_ds, 10)
        report = clustering_accuracy(
            assignment, blobs10.truth, seen_classes=blobs10.seen_classes
        )
        assert report.acc_all >= 0.95

    def test_floor_error(self, blobs10_ds):
        with pytest.raises(ConstraintError):
            assign_labels(blobs10_ds, blobs10_ds.n_labelled_classes - 1)

    def test_k_at_least_n_error(self, blobs10_ds):
        with pytest.raises(ConstraintError):
            assign_labels(blobs10_ds, blobs10_ds.n)
