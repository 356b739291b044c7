import numpy as np
import pytest

from snclust import FeatureMatrix, GcdDataset, gen_blobs, l2_normalize


def unit_rows(raw: np.ndarray) -> FeatureMatrix:
    return l2_normalize(FeatureMatrix(np.asarray(raw, dtype=np.float32)))


def angled_features(degrees) -> FeatureMatrix:
    """Unit 2-D vectors at the given angles."""
    rad = np.deg2rad(np.asarray(degrees, dtype=np.float64))
    return unit_rows(np.stack([np.cos(rad), np.sin(rad)], axis=1))


def random_unit_features(rng: np.random.Generator, n: int, d: int) -> FeatureMatrix:
    return unit_rows(rng.standard_normal((n, d)))


def random_gcd_dataset(
    rng: np.random.Generator, n: int, d: int, n_classes: int, labelled_frac: float
) -> GcdDataset:
    """Random unit features with a random partial labelling over n_classes."""
    features = random_unit_features(rng, n, d)
    labels = np.full(n, -1, dtype=np.int64)
    n_lab = max(n_classes, int(round(labelled_frac * n)))
    chosen = rng.choice(n, size=min(n, n_lab), replace=False)
    labels[chosen] = rng.integers(0, n_classes, size=chosen.size)
    for cls in range(n_classes):  # every class must appear
        if not (labels == cls).any():
            labels[chosen[cls % chosen.size]] = cls
    return GcdDataset.from_arrays(features, labels, normalized=True)


@pytest.fixture(scope="session")
def blobs10():
    """The synthetic end-to-end dataset: 10 classes, 5 seen."""
    return gen_blobs(
        classes=10, seen=5, per_class=100, dim=16, sigma=0.15, seed=0, labelled_per_seen=50
    )


@pytest.fixture(scope="session")
def blobs10_ds(blobs10):
    return GcdDataset(blobs10.features, blobs10.labels)
