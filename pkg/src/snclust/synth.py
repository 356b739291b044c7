"""Synthetic sphere-blob generator with ground truth for end-to-end checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, UNLABELLED, l2_normalize
from .errors import ConstraintError


@dataclass(frozen=True)
class BlobDataset:
    features: FeatureMatrix  # l2-normalized
    labels: np.ndarray  # -1 except the labelled instances of seen classes
    truth: np.ndarray  # true class per instance
    seen_classes: list[int]


def gen_blobs(
    classes: int,
    seen: int,
    per_class: int,
    dim: int,
    sigma: float,
    seed: int = 0,
    labelled_per_seen: int | None = None,
) -> BlobDataset:
    """Gaussian blobs around unit-norm class centers, then row-normalized.

    Every class contributes ``per_class`` unlabelled instances; each of the
    first ``seen`` classes additionally contributes ``labelled_per_seen``
    labelled ones (default: half of ``per_class``). When ``classes <= dim``
    the centers are mutually orthogonal for a deterministic, well-separated
    layout; otherwise they are random unit vectors.
    """
    if classes < 1 or not 0 <= seen <= classes:
        raise ConstraintError(f"need 1 <= classes and 0 <= seen <= classes, got {classes}, {seen}")
    if per_class < 1 or dim < 1 or sigma < 0:
        raise ConstraintError("per_class and dim must be >= 1 and sigma >= 0")
    if labelled_per_seen is None:
        labelled_per_seen = per_class // 2
    if seen and labelled_per_seen < 1:
        raise ConstraintError("labelled_per_seen must be >= 1 when seen classes exist")

    rng = np.random.default_rng(seed)
    if classes <= dim:
        q, _ = np.linalg.qr(rng.standard_normal((dim, classes)))
        centers = q.T
    else:
        centers = rng.standard_normal((classes, dim))
        centers /= np.linalg.norm(centers, axis=1)[:, None]

    blocks = []
    labels = []
    truth = []
    for cls in range(classes):
        count = per_class + (labelled_per_seen if cls < seen else 0)
        blocks.append(centers[cls] + sigma * rng.standard_normal((count, dim)))
        truth.extend([cls] * count)
        if cls < seen:
            labels.extend([cls] * labelled_per_seen + [UNLABELLED] * per_class)
        else:
            labels.extend([UNLABELLED] * count)

    features = l2_normalize(FeatureMatrix(np.concatenate(blocks).astype(np.float32)))
    return BlobDataset(
        features=features,
        labels=np.array(labels, dtype=np.int64),
        truth=np.array(truth, dtype=np.int64),
        seen_classes=list(range(seen)),
    )
