"""Datasets: synthetic Gaussian blobs, IDX file ingestion, Dirichlet partitioning."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError
from .seeding import derive_seed

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    """Inputs as an (n, input_dim) float64 array plus integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.inputs) != len(self.labels):
            raise ConfigurationError(
                f"{len(self.inputs)} inputs vs {len(self.labels)} labels"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigurationError("label out of range for num_classes")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.inputs[idx].copy(), self.labels[idx].copy(), self.num_classes)


@dataclass
class PartitionSpec:
    """Disjoint per-client sample index lists covering the dataset exactly."""

    alpha: float
    num_clients: int
    assignments: list[np.ndarray]
    seed: int

    def counts(self) -> list[int]:
        return [len(a) for a in self.assignments]


def class_direction(c: int, input_dim: int) -> np.ndarray:
    """Deterministic unit-norm center for class c (independent of dataset seed)."""
    rng = np.random.Generator(np.random.PCG64(1000 + c))
    v = rng.standard_normal(input_dim)
    return v / np.linalg.norm(v)


def generate_synthetic(
    num_classes: int,
    samples_per_class: int,
    input_dim: int,
    spread: float,
    seed: int,
) -> Dataset:
    """Gaussian blobs: class c centered at a fixed unit direction, noise std `spread`."""
    if num_classes < 1 or samples_per_class < 1 or input_dim < 1:
        raise ConfigurationError("num_classes, samples_per_class, input_dim must be positive")
    if spread < 0:
        raise ConfigurationError(f"spread must be non-negative, got {spread}")
    rng = np.random.Generator(np.random.PCG64(seed))
    inputs = np.empty((num_classes * samples_per_class, input_dim))
    labels = np.empty(num_classes * samples_per_class, dtype=int)
    for c in range(num_classes):
        lo = c * samples_per_class
        noise = rng.standard_normal((samples_per_class, input_dim))
        inputs[lo : lo + samples_per_class] = class_direction(c, input_dim) + spread * noise
        labels[lo : lo + samples_per_class] = c
    return Dataset(inputs, labels, num_classes)


def holdout_split(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle and split into (train, holdout); holdout gets ceil(fraction*n)."""
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError(f"holdout fraction must be in (0,1), got {fraction}")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(dataset))
    n_hold = int(np.ceil(fraction * len(dataset)))
    if n_hold >= len(dataset):
        raise ConfigurationError("holdout fraction leaves no training data")
    return dataset.subset(order[n_hold:]), dataset.subset(order[:n_hold])


def _largest_remainder_counts(proportions: np.ndarray, total: int) -> np.ndarray:
    raw = proportions * total
    counts = np.floor(raw).astype(int)
    short = total - counts.sum()
    if short > 0:
        # stable order: ties broken toward the lower client index
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(
    dataset: Dataset, alpha: float, num_clients: int, seed: int
) -> PartitionSpec:
    """Per-class Dirichlet(alpha) proportions over clients, rounded by largest
    remainder; re-drawn (up to 100 attempts, seed+attempt) until no client is
    empty. Depends only on labels/counts, never on input values.
    """
    if len(dataset) == 0:
        raise ConfigurationError("cannot partition an empty dataset")
    if alpha <= 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    if num_clients < 2:
        raise ConfigurationError(f"need at least 2 clients, got {num_clients}")
    if len(dataset) < num_clients:
        raise ConfigurationError(
            f"{len(dataset)} samples cannot cover {num_clients} clients"
        )
    labels = dataset.labels
    for attempt in range(100):
        rng = np.random.Generator(np.random.PCG64(seed + attempt))
        buckets: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
        for c in range(dataset.num_classes):
            idx = np.flatnonzero(labels == c)
            if len(idx) == 0:
                continue
            idx = rng.permutation(idx)
            q = rng.dirichlet(np.full(num_clients, alpha))
            counts = _largest_remainder_counts(q, len(idx))
            start = 0
            for k in range(num_clients):
                buckets[k].append(idx[start : start + counts[k]])
                start += counts[k]
        assignments = [
            np.sort(np.concatenate(b)) if b else np.empty(0, dtype=int) for b in buckets
        ]
        if all(len(a) > 0 for a in assignments):
            return PartitionSpec(alpha, num_clients, assignments, seed)
    raise ConfigurationError(
        f"no non-empty partition found for alpha={alpha}, K={num_clients} after 100 draws"
    )


# ---------------------------------------------------------------------------
# IDX ingestion


def _open_maybe_gz(path: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n: int, path: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated file (wanted {n} bytes, got {len(data)})")
    return data


def load_idx_dataset(images_path: str, labels_path: str) -> Dataset:
    """Load an IDX image/label pair; pixels scaled to [0,1], images flattened."""
    with _open_maybe_gz(images_path) as f:
        magic, n_images, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(f"{images_path}: bad magic 0x{magic:08x} for IDX images")
        pixels = np.frombuffer(
            _read_exact(f, n_images * rows * cols, images_path), dtype=np.uint8
        )
    with _open_maybe_gz(labels_path) as f:
        magic, n_labels = struct.unpack(">II", _read_exact(f, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(f"{labels_path}: bad magic 0x{magic:08x} for IDX labels")
        labels = np.frombuffer(_read_exact(f, n_labels, labels_path), dtype=np.uint8)
    if n_images != n_labels:
        raise FormatError(
            f"{images_path}: {n_images} images but {labels_path} has {n_labels} labels"
        )
    inputs = pixels.astype(float).reshape(n_images, rows * cols) / 255.0
    num_classes = int(labels.max()) + 1 if n_labels else 1
    return Dataset(inputs, labels.astype(int), num_classes)
