"""MNIST IDX parsing, unit-sphere normalization and label partitioning.

Images are kept as numpy arrays throughout: a raw image is a (28, 28) uint8
array, a unit image is a flat (784,) float64 vector in row-major order
(row 0 = top of the picture).
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from pcann.errors import DimensionMismatch, InvalidLabel, Truncated, WrongMagic, ZeroNorm

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SIDE = 28
PIXELS = SIDE * SIDE
CLASSES = tuple(range(10))

_GZIP_PREFIX = b"\x1f\x8b"


def _header(data: bytes, count: int, what: str) -> tuple[int, ...]:
    size = 4 * count
    if len(data) < size:
        raise Truncated(f"{what} header needs {size} bytes, got {len(data)}")
    return struct.unpack(f">{count}I", data[:size])


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX3 image file into an (n, 28, 28) uint8 array."""
    if len(data) >= 4:
        (magic,) = struct.unpack(">I", data[:4])
        if magic != IMAGE_MAGIC:
            raise WrongMagic(f"image file magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    magic, n, rows, cols = _header(data, 4, "image")
    if (rows, cols) != (SIDE, SIDE):
        raise DimensionMismatch(f"images are {rows}x{cols}, expected {SIDE}x{SIDE}")
    payload = memoryview(data)[16:]
    need = n * PIXELS
    if len(payload) < need:
        raise Truncated(f"image payload has {len(payload)} bytes, header declares {need}")
    return np.frombuffer(payload[:need], dtype=np.uint8).reshape(n, SIDE, SIDE).copy()


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX1 label file into an (n,) int64 array of digits."""
    if len(data) >= 4:
        (magic,) = struct.unpack(">I", data[:4])
        if magic != LABEL_MAGIC:
            raise WrongMagic(f"label file magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    magic, n = _header(data, 2, "label")
    payload = memoryview(data)[8:]
    if len(payload) < n:
        raise Truncated(f"label payload has {len(payload)} bytes, header declares {n}")
    labels = np.frombuffer(payload[:n], dtype=np.uint8)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise InvalidLabel(f"label {labels[bad[0]]} at index {bad[0]} is outside 0..9")
    return labels.astype(np.int64)


def serialize_idx_images(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8).reshape(-1, SIDE, SIDE)
    return struct.pack(">IIII", IMAGE_MAGIC, len(images), SIDE, SIDE) + images.tobytes()


def serialize_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes()


def read_maybe_gzip(path: str | os.PathLike) -> bytes:
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == _GZIP_PREFIX:
        data = gzip.decompress(data)
    return data


def normalize(img) -> np.ndarray:
    """Flatten an image row-major and scale it to unit Euclidean length."""
    x = np.asarray(img, dtype=np.float64).reshape(PIXELS)
    norm = np.sqrt(np.dot(x, x))
    if norm == 0.0:
        raise ZeroNorm("blank image cannot be normalized")
    return x / norm


def normalize_batch(images) -> np.ndarray:
    """Row-wise :func:`normalize` over a stack of images; returns (n, 784)."""
    x = np.asarray(images, dtype=np.float64).reshape(-1, PIXELS)
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    blank = np.flatnonzero(norms == 0.0)
    if blank.size:
        raise ZeroNorm(f"image {blank[0]} is blank and cannot be normalized")
    return x / norms[:, None]


@dataclass(frozen=True)
class LabeledDataset:
    """Unit images (n, 784) with their supervised labels (n,)."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64).reshape(-1, PIXELS)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(images) != len(labels):
            raise DimensionMismatch(f"{len(images)} images but {len(labels)} labels")
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise InvalidLabel("labels must lie in 0..9")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_raw(cls, raw_images, labels) -> "LabeledDataset":
        return cls(normalize_batch(raw_images), labels)


def partition_by_label(ds: LabeledDataset) -> dict[int, np.ndarray]:
    """Split a dataset into the ten single-label buckets, keeping dataset order."""
    return {a: ds.images[ds.labels == a] for a in CLASSES}


def load_dataset(images_path, labels_path) -> LabeledDataset:
    """Read an image/label IDX pair (plain or gzip) and normalize the images."""
    try:
        raw = parse_idx_images(read_maybe_gzip(images_path))
    except (WrongMagic, DimensionMismatch, Truncated, ZeroNorm) as e:
        raise type(e)(f"{images_path}: {e}") from e
    try:
        labels = parse_idx_labels(read_maybe_gzip(labels_path))
    except (WrongMagic, InvalidLabel, Truncated) as e:
        raise type(e)(f"{labels_path}: {e}") from e
    if len(raw) != len(labels):
        raise DimensionMismatch(
            f"{images_path} has {len(raw)} images but {labels_path} has {len(labels)} labels"
        )
    try:
        return LabeledDataset.from_raw(raw, labels)
    except ZeroNorm as e:
        raise ZeroNorm(f"{images_path}: {e}") from e
