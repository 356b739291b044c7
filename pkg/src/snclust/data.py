"""Feature/label data model, file formats, normalization and the labelled split.

Binary feature format (little-endian, 24-byte header):

    offset  size  field
    0       4     magic ``CIPR``
    4       2     version, u16, currently 1
    6       8     instance count n, u64
    14      4     feature dimension d, u32
    18      1     flags, u8 (bit 0: rows are l2-normalized)
    19      5     reserved, must be zero
    24      n*d   float32 values, row-major

CSV feature format: one row per instance, numeric columns, optional
header row. Label files are CSV with a mandatory ``index,label`` header;
indices absent from the file (or with an empty label field) are
unlabelled.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, DataFormatError

MAGIC = b"CIPR"
FORMAT_VERSION = 1
FLAG_NORMALIZED = 0x01
UNLABELLED = -1

_HEADER = struct.Struct("<4sHQIB5s")
_UNIT_TOL = 1e-4


@dataclass(frozen=True)
class FeatureMatrix:
    """An (n, d) float32 embedding matrix, optionally known to be unit-norm."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise ConstraintError(f"feature matrix must be 2-D, got shape {values.shape}")
        n, d = values.shape
        if n < 1 or d < 1:
            raise ConstraintError(f"feature matrix needs n >= 1 and d >= 1, got {n}x{d}")
        if not np.isfinite(values).all():
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ConstraintError(f"non-finite value at row {bad // d}, column {bad % d}")
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.normalized:
            norms = np.linalg.norm(values.astype(np.float64), axis=1)
            off = np.abs(norms - 1.0)
            if off.max() > _UNIT_TOL:
                row = int(np.argmax(off))
                raise ConstraintError(
                    f"matrix flagged normalized but row {row} has norm {norms[row]:.6f}"
                )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GcdDataset:
    """Features plus optional per-instance class labels (-1 = unlabelled).

    Labelled class ids must be contiguous 0..n_labelled_classes-1 with every
    class appearing at least once; use :meth:`from_arrays` to remap arbitrary
    ids into that form.
    """

    features: FeatureMatrix
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        labels = self.labels
        if labels is None:
            labels = np.full(self.features.n, UNLABELLED, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64).copy()
        if labels.shape != (self.features.n,):
            raise ConstraintError(
                f"labels shape {labels.shape} does not match n={self.features.n}"
            )
        present = np.unique(labels[labels >= 0])
        if present.size and not np.array_equal(present, np.arange(present.size)):
            raise ConstraintError(
                "labelled class ids must be contiguous 0..N_L-1; "
                "use GcdDataset.from_arrays to remap"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_arrays(cls, features, labels=None, normalized: bool = False) -> "GcdDataset":
        """Build a dataset from raw arrays, remapping label ids first-seen."""
        if not isinstance(features, FeatureMatrix):
            features = FeatureMatrix(np.asarray(features), normalized=normalized)
        if labels is None:
            return cls(features, None)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != features.n:
            raise ConstraintError(
                f"labels must be a length-{features.n} vector, got shape {labels.shape}"
            )
        return cls(features, remap_labels(labels))

    @property
    def n(self) -> int:
        return self.features.n

    @property
    def d(self) -> int:
        return self.features.d

    @property
    def labelled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels >= 0)

    @property
    def unlabelled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels < 0)

    @property
    def n_labelled_classes(self) -> int:
        mask = self.labels >= 0
        return int(self.labels[mask].max()) + 1 if mask.any() else 0

    def with_labels(self, labels: np.ndarray) -> "GcdDataset":
        return GcdDataset(self.features, labels)


@dataclass(frozen=True)
class LabelledSplit:
    """Per-class stratified split of the labelled indices into train/val."""

    train_mask: np.ndarray
    val_mask: np.ndarray
    ratio: float
    seed: int


def remap_labels(labels: np.ndarray) -> np.ndarray:
    """Remap label ids to contiguous 0..N_L-1 preserving first-seen order."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.full(labels.shape, UNLABELLED, dtype=np.int64)
    seen: dict[int, int] = {}
    for i in np.flatnonzero(labels >= 0):
        lab = int(labels[i])
        out[i] = seen.setdefault(lab, len(seen))
    return out


def load_features(path, fmt: str = "binary") -> FeatureMatrix:
    """Load a feature matrix from ``path`` in the given format.

    ``fmt`` is ``"binary"`` (the CIPR container described in the module
    docstring) or ``"csv"``. Parse failures raise :class:`DataFormatError`
    naming the offending byte or line.
    """
    if fmt == "binary":
        return _load_binary(path)
    if fmt == "csv":
        return _load_csv(path)
    raise ConstraintError(f"unknown feature format {fmt!r} (expected 'binary' or 'csv')")


def _load_binary(path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header, got {len(raw)} of 24 bytes")
    magic, version, n, d, flags, reserved = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r} at byte 0")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version} at byte 4")
    if n < 1 or d < 1:
        raise DataFormatError(f"{path}: invalid shape {n}x{d} in header")
    if reserved != b"\x00" * 5:
        raise DataFormatError(f"{path}: nonzero reserved bytes at byte 19")
    if flags & ~FLAG_NORMALIZED:
        raise DataFormatError(f"{path}: unknown flag bits 0x{flags:02x} at byte 18")
    expected = _HEADER.size + n * d * 4
    if len(raw) != expected:
        raise DataFormatError(
            f"{path}: file has {len(raw)} bytes, expected {expected} "
            f"(payload truncated at byte {len(raw)})"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, d)
    finite = np.isfinite(values)
    if not finite.all():
        idx = int(np.flatnonzero(~finite.ravel())[0])
        raise DataFormatError(f"{path}: non-finite value at byte {_HEADER.size + idx * 4}")
    try:
        return FeatureMatrix(values, normalized=bool(flags & FLAG_NORMALIZED))
    except ConstraintError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def _load_csv(path) -> FeatureMatrix:
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                parsed = [float(tok) for tok in row]
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise DataFormatError(f"{path}, line {lineno}: non-numeric value")
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise DataFormatError(
                    f"{path}, line {lineno}: row has {len(parsed)} columns, expected {width}"
                )
            if not all(math.isfinite(v) for v in parsed):
                raise DataFormatError(f"{path}, line {lineno}: non-finite value")
            rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return FeatureMatrix(np.array(rows, dtype=np.float32), normalized=False)


def save_features(matrix: FeatureMatrix, path, fmt: str = "binary") -> None:
    """Write a feature matrix to disk in the binary or CSV format."""
    if fmt == "binary":
        flags = FLAG_NORMALIZED if matrix.normalized else 0
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, matrix.n, matrix.d, flags, b"\x00" * 5)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(matrix.values, dtype="<f4").tobytes())
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in matrix.values:
                writer.writerow([repr(float(v)) for v in row])
    else:
        raise ConstraintError(f"unknown feature format {fmt!r}")


def load_labels(path, n: int) -> np.ndarray:
    """Load per-instance optional class ids from a CSV with header ``index,label``.

    Missing or empty-label indices come back as -1. Class ids are remapped to
    contiguous 0..N_L-1 preserving first-seen order.
    """
    labels = np.full(n, UNLABELLED, dtype=np.int64)
    seen_rows: set[int] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return labels  # empty file: everything unlabelled
        if [tok.strip().lower() for tok in header] != ["index", "label"]:
            raise DataFormatError(f"{path}, line 1: expected header 'index,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError(f"{path}, line {lineno}: expected 2 columns")
            try:
                idx = int(row[0])
            except ValueError:
                raise DataFormatError(f"{path}, line {lineno}: non-integer index {row[0]!r}")
            if not 0 <= idx < n:
                raise DataFormatError(
                    f"{path}, line {lineno}: index {idx} out of range [0, {n})"
                )
            if idx in seen_rows:
                raise DataFormatError(f"{path}, line {lineno}: duplicate index {idx}")
            seen_rows.add(idx)
            tok = row[1].strip()
            if not tok:
                continue
            try:
                lab = int(tok)
            except ValueError:
                raise DataFormatError(f"{path}, line {lineno}: non-integer label {tok!r}")
            if lab < 0:
                raise DataFormatError(f"{path}, line {lineno}: negative label {lab}")
            labels[idx] = lab
    return remap_labels(labels)


def save_labels(labels: np.ndarray, path) -> None:
    """Write a label CSV (`index,label`), listing labelled indices only."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label"])
        for i in np.flatnonzero(np.asarray(labels) >= 0):
            writer.writerow([int(i), int(labels[i])])


def l2_normalize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Scale every row to unit Euclidean norm. Idempotent; zero rows are an error."""
    if matrix.normalized:
        return matrix
    values = matrix.values.astype(np.float64)
    norms = np.linalg.norm(values, axis=1)
    if (norms == 0.0).any():
        row = int(np.flatnonzero(norms == 0.0)[0])
        raise ConstraintError(f"cannot normalize zero-norm row {row}")
    return FeatureMatrix((values / norms[:, None]).astype(np.float32), normalized=True)


def split_labelled(ds: GcdDataset, ratio: float, seed: int) -> LabelledSplit:
    """Stratified split of the labelled indices: ceil(ratio * k) per class to train."""
    if not 0.0 < ratio < 1.0:
        raise ConstraintError(f"split ratio must be in (0, 1), got {ratio}")
    labelled = ds.labelled_indices
    if labelled.size == 0:
        raise ConstraintError("cannot split: dataset has no labelled instances")
    rng = np.random.default_rng(seed)
    train_parts = []
    val_parts = []
    for cls in range(ds.n_labelled_classes):
        idx = np.flatnonzero(ds.labels == cls)
        perm = rng.permutation(idx)
        take = math.ceil(ratio * idx.size)
        train_parts.append(perm[:take])
        val_parts.append(perm[take:])
    train = np.sort(np.concatenate(train_parts)).astype(np.int64)
    val = np.sort(np.concatenate(val_parts)).astype(np.int64) if val_parts else np.array([], np.int64)
    return LabelledSplit(train_mask=train, val_mask=val, ratio=ratio, seed=seed)
