"""Dataset loading and partitioning.

IDX files (optionally gzipped) are parsed into a flat [0, 1]-scaled container;
shards of a fixed size per device are drawn disjointly. Synthetic Gaussian
blob datasets stand in for image data in hermetic test environments.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


class IdxFormatError(ValueError):
    """Common base for IDX parsing failures."""


class BadMagicError(IdxFormatError):
    pass


class TruncatedPayloadError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


@dataclass
class LabeledDataset:
    """Flat feature rows in [0, 1] with integer class labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images vs {len(self.labels)} labels")
        if len(self.images) and (self.images.min() < -1e-9 or self.images.max() > 1 + 1e-9):
            raise ValueError("image values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.images[idx], self.labels[idx])


def _read_file(path) -> bytes:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":  # gzip magic
        raw = gzip.decompress(raw)
    return raw


def _parse_header(raw: bytes, path, expected_magic: int, n_dims: int):
    header_len = 4 * (1 + n_dims)
    if len(raw) < header_len:
        raise TruncatedPayloadError(f"{path}: file shorter than its header")
    magic = struct.unpack(">i", raw[:4])[0]
    if magic != expected_magic:
        raise BadMagicError(f"{path}: magic {magic}, expected {expected_magic}")
    dims = struct.unpack(f">{n_dims}i", raw[4:header_len])
    return dims, raw[header_len:]


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Parse big-endian IDX image/label files into a flat dataset scaled to
    [0, 1]. Accepts gzip-compressed files transparently."""
    (n, rows, cols), pixels = _parse_header(_read_file(images_path), images_path,
                                            IMAGES_MAGIC, 3)
    if len(pixels) < n * rows * cols:
        raise TruncatedPayloadError(
            f"{images_path}: expected {n * rows * cols} pixel bytes, found {len(pixels)}")
    (n_labels,), label_bytes = _parse_header(_read_file(labels_path), labels_path,
                                             LABELS_MAGIC, 1)
    if len(label_bytes) < n_labels:
        raise TruncatedPayloadError(
            f"{labels_path}: expected {n_labels} label bytes, found {len(label_bytes)}")
    if n != n_labels:
        raise CountMismatchError(f"{n} images vs {n_labels} labels")
    images = np.frombuffer(pixels[:n * rows * cols], dtype=np.uint8)
    images = images.reshape(n, rows * cols).astype(np.float32) / 255.0
    labels = np.frombuffer(label_bytes[:n_labels], dtype=np.uint8).astype(np.int64)
    return LabeledDataset(images, labels)


def write_idx(images_path, labels_path, images_uint8: np.ndarray,
              labels: np.ndarray) -> None:
    """Write (n, rows, cols) uint8 images and labels as IDX files; paths
    ending in .gz are gzip-compressed. Useful for building test fixtures."""
    images_uint8 = np.asarray(images_uint8, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images_uint8.shape
    img_blob = struct.pack(">4i", IMAGES_MAGIC, n, rows, cols) + images_uint8.tobytes()
    lbl_blob = struct.pack(">2i", LABELS_MAGIC, len(labels)) + labels.tobytes()
    for path, blob in ((images_path, img_blob), (labels_path, lbl_blob)):
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as f:
            f.write(blob)


# ---------------------------------------------------------------------------
# partitioning


@dataclass(frozen=True)
class PartitionSpec:
    per_node: int = 10
    scheme: str = "iid"  # "iid" or "label_skew"
    classes_per_node: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.scheme not in ("iid", "label_skew"):
            raise ValueError(f"unknown partition scheme {self.scheme!r}")
        if self.per_node < 1:
            raise ValueError("per_node must be >= 1")


def partition(ds: LabeledDataset, m: int, spec: PartitionSpec,
              rng: np.random.Generator) -> list[np.ndarray]:
    """Disjoint per-device shards as index arrays into the dataset.

    iid draws uniformly without replacement; label_skew assigns each node a
    rotating window of classes and draws only from those.
    """
    if spec.seed is not None:
        rng = np.random.default_rng(spec.seed)
    needed = m * spec.per_node
    if needed > len(ds):
        raise ValueError(f"partition needs {needed} samples, dataset has {len(ds)}")
    if spec.scheme == "iid":
        picks = rng.permutation(len(ds))[:needed]
        return [picks[i * spec.per_node:(i + 1) * spec.per_node] for i in range(m)]

    classes = np.unique(ds.labels)
    pools = {int(c): list(rng.permutation(np.flatnonzero(ds.labels == c))) for c in classes}
    shards = []
    for node in range(m):
        offsets = (node * spec.classes_per_node + np.arange(spec.classes_per_node))
        assigned = classes[offsets % len(classes)]
        shard = []
        for k in range(spec.per_node):
            c = int(assigned[k % len(assigned)])
            if not pools[c]:
                raise ValueError(f"class {c} exhausted while filling node {node}")
            shard.append(pools[c].pop())
        shards.append(np.asarray(shard, dtype=np.int64))
    return shards


# ---------------------------------------------------------------------------
# synthetic data


def synthetic_blobs(num_classes: int, n_per_class: int, dim: int, separation: float,
                    rng: np.random.Generator, spread: float = 0.05) -> LabeledDataset:
    """Gaussian class blobs squeezed into [0, 1].

    Class centers sit at 0.5 + (separation / sqrt(2)) * u_c for random unit
    vectors u_c, making pairwise center distances approximately `separation`
    in high dimension; per-component noise has std dev `spread`. Values are
    clipped to [0, 1], so keep separation + spread moderate.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    dirs = rng.standard_normal((num_classes, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centers = 0.5 + (separation / np.sqrt(2.0)) * dirs
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), n_per_class)
    images = centers[labels] + spread * rng.standard_normal((len(labels), dim))
    return LabeledDataset(np.clip(images, 0.0, 1.0).astype(np.float32), labels)


def synthetic_split(num_classes: int, train_per_class: int, test_per_class: int,
                    dim: int, separation: float, rng: np.random.Generator,
                    spread: float = 0.05) -> tuple[LabeledDataset, LabeledDataset]:
    """Train/test datasets drawn from one shared set of blob centers."""
    total = synthetic_blobs(num_classes, train_per_class + test_per_class, dim,
                            separation, rng, spread)
    train_idx, test_idx = [], []
    for c in range(num_classes):
        rows = np.flatnonzero(total.labels == c)
        train_idx.extend(rows[:train_per_class])
        test_idx.extend(rows[train_per_class:])
    return total.subset(train_idx), total.subset(test_idx)
