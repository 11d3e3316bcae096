"""Dataset ingestion: IDX (MNIST) files, binarization, minibatching and a
bars-and-stripes generator small enough for exact enumeration."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .errors import BadMagic, DataError, EmptyDataset, Truncated

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
DEFAULT_THRESHOLD = 127


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ImageSet:
    """Raw 8-bit images, shape ``(n_items, rows, cols)``."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[1] * pixels.shape[2] == 0:
            raise DataError(f"pixels must have shape (n, rows, cols) with rows*cols > 0, got {pixels.shape}")
        object.__setattr__(self, "pixels", _frozen(pixels.astype(np.uint8, copy=False)))

    @property
    def n_items(self) -> int:
        return self.pixels.shape[0]

    @property
    def rows(self) -> int:
        return self.pixels.shape[1]

    @property
    def cols(self) -> int:
        return self.pixels.shape[2]

    def __eq__(self, other):
        if not isinstance(other, ImageSet):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class BinaryDataset:
    """Immutable set of {0,1} vectors, shape ``(n_items, dim)``, plus optional labels.

    Labels are carried for grouping in reports only; training never reads them.
    """

    bits: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DataError(f"bits must be 2-D (n_items, dim), got shape {bits.shape}")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise DataError("bits must contain only 0 and 1")
        object.__setattr__(self, "bits", _frozen(bits.astype(np.uint8, copy=False)))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (bits.shape[0],):
                raise DataError("labels must have one entry per item")
            object.__setattr__(self, "labels", _frozen(labels))

    @property
    def n_items(self) -> int:
        return self.bits.shape[0]

    @property
    def dim(self) -> int:
        return self.bits.shape[1]

    def as_float(self) -> np.ndarray:
        return self.bits.astype(np.float64)

    def subset(self, idx) -> "BinaryDataset":
        labels = None if self.labels is None else self.labels[idx]
        return BinaryDataset(self.bits[idx], labels)


def _read_idx(raw: bytes):
    if len(raw) < 4:
        raise Truncated("file shorter than the IDX magic word")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic == IMAGES_MAGIC:
        ndim = 3
    elif magic == LABELS_MAGIC:
        ndim = 1
    else:
        raise BadMagic(f"unknown IDX magic 0x{magic:08x}")
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise Truncated(f"header needs {header_len} bytes, file has {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    expected = int(np.prod(dims, dtype=np.int64))
    payload = raw[header_len:]
    if len(payload) < expected:
        raise Truncated(f"header promises {expected} payload bytes, found {len(payload)}")
    if len(payload) > expected:
        raise DataError(f"{len(payload) - expected} trailing bytes after IDX payload")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(dims)
    return magic, data


def load_idx(path) -> ImageSet | np.ndarray:
    """Parse an IDX file.

    Image files (magic 0x803) give an :class:`ImageSet`; label files (magic
    0x801) give a 1-D ``uint8`` array.
    """
    magic, data = _read_idx(Path(path).read_bytes())
    if magic == IMAGES_MAGIC:
        return ImageSet(data.copy())
    return _frozen(data.copy())


def idx_bytes(obj: ImageSet | np.ndarray) -> bytes:
    if isinstance(obj, ImageSet):
        head = struct.pack(">4I", IMAGES_MAGIC, obj.n_items, obj.rows, obj.cols)
        return head + obj.pixels.tobytes()
    labels = np.asarray(obj, dtype=np.uint8)
    return struct.pack(">2I", LABELS_MAGIC, labels.shape[0]) + labels.tobytes()


def save_idx(obj: ImageSet | np.ndarray, path) -> None:
    Path(path).write_bytes(idx_bytes(obj))


def binarize(images: ImageSet, threshold: int = DEFAULT_THRESHOLD,
             labels: Optional[np.ndarray] = None) -> BinaryDataset:
    bits = (images.pixels.reshape(images.n_items, -1) > threshold).astype(np.uint8)
    return BinaryDataset(bits, labels)


def batch_indices(n_items: int, batch_size: int, seed) -> list[np.ndarray]:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if n_items == 0:
        raise EmptyDataset("cannot batch an empty dataset")
    perm = np.random.default_rng(seed).permutation(n_items)
    return [perm[i:i + batch_size] for i in range(0, n_items, batch_size)]


def minibatches(data: BinaryDataset, batch_size: int, seed) -> Iterator[np.ndarray]:
    """Yield float batches covering the dataset once, in a seeded random order."""
    for idx in batch_indices(data.n_items, batch_size, seed):
        yield data.bits[idx].astype(np.float64)


def synthetic_bars_stripes(side: int, n_items: int, seed) -> BinaryDataset:
    """Random bars-and-stripes images flattened row-major to ``side**2`` bits.

    Each item picks rows or columns with probability 1/2, then switches each
    line on independently with probability 1/2. Label 0 marks row patterns,
    1 column patterns.
    """
    if side < 2:
        raise ValueError("side must be >= 2")
    rng = np.random.default_rng(seed)
    columns = rng.random(n_items) < 0.5
    lines = (rng.random((n_items, side)) < 0.5).astype(np.uint8)
    grids = np.repeat(lines[:, :, None], side, axis=2)
    grids[columns] = grids[columns].transpose(0, 2, 1)
    return BinaryDataset(grids.reshape(n_items, side * side), columns.astype(np.uint8))
