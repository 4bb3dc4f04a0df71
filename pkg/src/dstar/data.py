"""Datasets: synthetic Gaussian blobs and IDX image/label file ingestion."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


class IdxFormatError(ValueError):
    """An IDX file does not match the expected binary layout."""


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with integer labels in [0, num_classes)."""

    features: np.ndarray  # (m, p) float64
    labels: np.ndarray    # (m,) int64
    num_classes: int

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError("Dataset: features must be a nonempty 2-D matrix")
        if labs.shape != (feats.shape[0],):
            raise ValueError("Dataset: need exactly one label per feature row")
        if self.num_classes < 1:
            raise ValueError("Dataset: num_classes must be positive")
        if labs.min() < 0 or labs.max() >= self.num_classes:
            raise ValueError("Dataset: label outside [0, num_classes)")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def rows(self, idx) -> tuple[np.ndarray, np.ndarray]:
        return self.features[idx], self.labels[idx]


@dataclass(frozen=True)
class Shard:
    """A worker's slice of a Dataset, stored as strictly increasing row indices.

    Shards of distinct workers are pairwise disjoint and never overlap the
    server's validation or test subsets; the partitioner enforces this.
    """

    owner: int
    row_indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.row_indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("Shard: need at least one row")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            raise ValueError("Shard: row indices must be strictly increasing")
        object.__setattr__(self, "row_indices", idx)

    def __len__(self) -> int:
        return int(self.row_indices.size)


def generate_blobs(n_samples: int, p: int, C: int, separation: float,
                   rng: RngStream) -> Dataset:
    """Isotropic unit-variance Gaussian clusters with separated centers.

    Centers are drawn standard normal and rescaled so the closest pair sits
    exactly `separation` apart. Class sizes are balanced to within one sample
    and rows are shuffled, so any contiguous split stays class-mixed.
    """
    if C < 2:
        raise ValueError(f"generate_blobs: need at least 2 classes, got {C}")
    if n_samples < C:
        raise ValueError(f"generate_blobs: n_samples={n_samples} < classes={C}")
    if p < 1:
        raise ValueError(f"generate_blobs: need at least 1 feature, got {p}")
    if separation <= 0:
        raise ValueError(f"generate_blobs: separation must be positive, got {separation}")

    centers = rng.normal(size=(C, p))
    min_dist = min(
        float(np.linalg.norm(centers[i] - centers[j]))
        for i in range(C) for j in range(i + 1, C)
    )
    if min_dist == 0.0:
        raise ValueError("generate_blobs: degenerate coincident centers")
    centers *= separation / min_dist

    labels = np.arange(n_samples, dtype=np.int64) % C
    features = centers[labels] + rng.normal(size=(n_samples, p))
    perm = rng.permutation(n_samples)
    return Dataset(features[perm], labels[perm], C)


def _read_exact(fh, n: int, path, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise IdxFormatError(f"{path}: truncated file while reading {what}")
    return buf


def read_idx_images(path) -> np.ndarray:
    """Parse a 3-D IDX image file into a (count, rows, cols) uint8 array."""
    with open(path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, path, "magic"))
        if magic != IDX_MAGIC_IMAGES:
            raise IdxFormatError(
                f"{path}: bad magic 0x{magic:08x} for image file"
                f" (want 0x{IDX_MAGIC_IMAGES:08x})"
            )
        count, rows, cols = struct.unpack(">III", _read_exact(fh, 12, path, "image dimensions"))
        if count < 1 or rows < 1 or cols < 1:
            raise IdxFormatError(f"{path}: non-positive image dimensions {count}x{rows}x{cols}")
        data = _read_exact(fh, count * rows * cols, path, "pixel data")
        if fh.read(1):
            raise IdxFormatError(f"{path}: trailing bytes after pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    """Parse a 1-D IDX label file into a (count,) uint8 array."""
    with open(path, "rb") as fh:
        (magic,) = struct.unpack(">I", _read_exact(fh, 4, path, "magic"))
        if magic != IDX_MAGIC_LABELS:
            raise IdxFormatError(
                f"{path}: bad magic 0x{magic:08x} for label file"
                f" (want 0x{IDX_MAGIC_LABELS:08x})"
            )
        (count,) = struct.unpack(">I", _read_exact(fh, 4, path, "label count"))
        if count < 1:
            raise IdxFormatError(f"{path}: non-positive label count {count}")
        data = _read_exact(fh, count, path, "label data")
        if fh.read(1):
            raise IdxFormatError(f"{path}: trailing bytes after label data")
    return np.frombuffer(data, dtype=np.uint8)


def write_idx_images(path, images: np.ndarray) -> None:
    arr = np.ascontiguousarray(images, dtype=np.uint8)
    if arr.ndim != 3:
        raise ValueError("write_idx_images: expected a (count, rows, cols) array")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_MAGIC_IMAGES, *arr.shape))
        fh.write(arr.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    arr = np.ascontiguousarray(labels, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("write_idx_labels: expected a 1-D array")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_MAGIC_LABELS, arr.shape[0]))
        fh.write(arr.tobytes())


def load_idx(images_path, labels_path) -> Dataset:
    """Load an IDX image/label pair; pixels scaled to [0, 1], rows flattened."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images in {images_path}"
            f" vs {labels.shape[0]} labels in {labels_path}"
        )
    m = images.shape[0]
    features = images.reshape(m, -1).astype(np.float64) / 255.0
    num_classes = int(labels.max()) + 1
    return Dataset(features, labels.astype(np.int64), num_classes)
