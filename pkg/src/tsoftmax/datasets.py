"""Dataset ingestion and generators.

All generators take an explicit seed and draw from a PCG64 stream, so
every dataset here is a pure function of its arguments.
"""
from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class LabeledDataset:
    """Samples stored sample-major: ``inputs`` is ``n × ...``."""

    inputs: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise DataFormatError(
                f"{self.name}: {self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels")
        if self.labels.size and self.labels.min() < 0:
            raise DataFormatError(f"{self.name}: negative label")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def sample_shape(self) -> tuple:
        return self.inputs.shape[1:]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def take(self, index) -> "LabeledDataset":
        index = np.asarray(index)
        return LabeledDataset(self.inputs[index], self.labels[index], self.name)

    def head(self, n: int) -> "LabeledDataset":
        return self.take(np.arange(min(n, len(self))))


@dataclass
class OodSource:
    name: str
    kind: str
    samples: np.ndarray


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(raw: bytes, expected_magic: int, path) -> np.ndarray:
    if len(raw) < 4:
        raise DataFormatError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    need = math.prod(dims)
    if len(raw) - header != need:
        raise DataFormatError(
            f"{path}: expected {need} data bytes for dims {dims}, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def read_idx_images(path) -> np.ndarray:
    """Image file as ``n × 1 × h × w`` floats in [0, 1]."""
    pixels = _parse_idx(_read_bytes(path), IMAGE_MAGIC, path)
    return (pixels.astype(np.float64) / 255.0)[:, None, :, :]


def load_idx(images_path, labels_path, name: str | None = None) -> LabeledDataset:
    images = read_idx_images(images_path)
    labels = _parse_idx(_read_bytes(labels_path), LABEL_MAGIC, labels_path).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images_path} holds {images.shape[0]} images but {labels_path} has {labels.shape[0]} labels")
    return LabeledDataset(images, labels, name or Path(images_path).name.split("-")[0])


def load_idx_split(directory, split: str, name: str | None = None) -> LabeledDataset:
    """Load ``<split>-images-idx3-ubyte`` and its labels (``.gz`` or plain)."""
    directory = Path(directory)
    paths = []
    for stem in (f"{split}-images-idx3-ubyte", f"{split}-labels-idx1-ubyte"):
        found = [directory / (stem + ext) for ext in ("", ".gz") if (directory / (stem + ext)).is_file()]
        if not found:
            raise DataFormatError(f"{directory}: missing {stem}[.gz]")
        paths.append(found[0])
    return load_idx(*paths, name=name or f"{directory.name}/{split}")


def encode_idx(dataset: LabeledDataset) -> tuple[bytes, bytes]:
    """Inverse of :func:`load_idx` for single-channel image data."""
    n, c, h, w = dataset.inputs.shape
    if c != 1:
        raise DataFormatError("IDX images are single channel")
    pixels = np.rint(dataset.inputs[:, 0] * 255.0).astype(np.uint8)
    images = struct.pack(">IIII", IMAGE_MAGIC, n, h, w) + pixels.tobytes()
    labels = struct.pack(">II", LABEL_MAGIC, n) + dataset.labels.astype(np.uint8).tobytes()
    return images, labels


def write_idx(dataset: LabeledDataset, images_path, labels_path) -> None:
    images, labels = encode_idx(dataset)
    Path(images_path).write_bytes(images)
    Path(labels_path).write_bytes(labels)


def default_cluster_centers(radius: float = 2.0) -> list[tuple[float, float]]:
    angles = np.deg2rad([90.0, 210.0, 330.0])
    return [(radius * math.cos(a), radius * math.sin(a)) for a in angles]


def synth_clusters(n_per_class: int, centers: Sequence[Sequence[float]] | None = None,
                   std: float = 0.4, seed: int = 0) -> LabeledDataset:
    """Isotropic Gaussian blobs in the plane, one class per center."""
    centers = np.asarray(centers if centers is not None else default_cluster_centers(),
                         dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] < 2:
        raise ConfigError("need at least two centers")
    if not std > 0:
        raise ConfigError(f"std must be positive, got {std}")
    rng = make_rng(seed)
    k, d = centers.shape
    points = centers[:, None, :] + std * rng.standard_normal((k, n_per_class, d))
    labels = np.repeat(np.arange(k), n_per_class)
    return LabeledDataset(points.reshape(-1, d), labels, "clusters")


def gaussian_noise_ood(n: int, shape: Sequence[int], seed: int,
                       mean: float = 0.5, std: float = 0.25) -> OodSource:
    """Pixel-wise Gaussian noise clipped to the image range [0, 1]."""
    if n <= 0:
        raise ConfigError("n must be positive")
    rng = make_rng(seed)
    samples = np.clip(mean + std * rng.standard_normal((n, *shape)), 0.0, 1.0)
    return OodSource("gaussian_noise", "gaussian_noise", samples)


def dataset_ood(dataset: LabeledDataset, name: str | None = None) -> OodSource:
    return OodSource(name or dataset.name, "dataset", dataset.inputs)


def batches(dataset: LabeledDataset, batch_size: int, seed: int = 0, shuffle: bool = True,
            rng: np.random.Generator | None = None,
            columns: bool = False) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(X, y)`` mini-batches covering each sample once.

    ``X`` is sample-major unless ``columns`` is set, in which case it is the
    dense ``N × N_b`` layout. Pass ``rng`` to continue an existing stream
    (one permutation per call).
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    n = len(dataset)
    if shuffle:
        order = (rng if rng is not None else make_rng(seed)).permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        X = dataset.inputs[idx]
        if columns:
            X = X.reshape(len(idx), -1).T
        yield X, dataset.labels[idx]
