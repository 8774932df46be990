"""Datasets, CSV ingestion, standardization and a synthetic domain-shift generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataFormatError(ValueError):
    """Raised when a delimited file cannot be turned into a Dataset."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (rows are examples) with optional labels.

    Arrays are copied and made read-only on construction.
    """

    features: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {x.shape}")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"features must be at least 1x1, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            r, c = np.argwhere(~np.isfinite(x))[0]
            raise ValueError(f"non-finite feature value at row {r}, column {c}")
        x.flags.writeable = False
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.array(self.labels)
            if y.ndim != 1 or y.shape[0] != x.shape[0]:
                raise ValueError(
                    f"labels must be 1-D of length {x.shape[0]}, got shape {y.shape}"
                )
            y.flags.writeable = False
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.labels is not None


@dataclass(frozen=True)
class DomainPair:
    """Labeled source and unlabeled target.

    ``target_truth`` is an evaluation-only side channel; fitting never reads it.
    """

    source: Dataset
    target: Dataset
    target_truth: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.source.labeled:
            raise ValueError("source dataset must carry labels")
        if self.target.labeled:
            raise ValueError("target dataset must not carry labels; use target_truth")
        if self.source.d != self.target.d:
            raise ValueError(
                f"feature dimension mismatch: source d={self.source.d}, "
                f"target d={self.target.d}"
            )
        if self.target_truth is not None:
            t = np.array(self.target_truth)
            if t.shape != (self.target.n,):
                raise ValueError("target_truth length must equal target row count")
            t.flags.writeable = False
            object.__setattr__(self, "target_truth", t)


def load_dataset(path, label_column: Optional[str] = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Every column except ``label_column`` must be numeric. Labels are kept as
    the raw strings found in the file.
    """
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file (no header row)")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataFormatError(f"{path}: table has a header but no data rows")

    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise DataFormatError(
                f"{path}: label column {label_column!r} not found in header {header}"
            )
        label_idx = header.index(label_column)
    feat_idx = [j for j in range(len(header)) if j != label_idx]
    if not feat_idx:
        raise DataFormatError(f"{path}: no feature columns")

    x = np.empty((len(body), len(feat_idx)), dtype=np.float64)
    labels = []
    for i, row in enumerate(body):
        line = i + 2  # 1-based, header is line 1
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}: row {line} has {len(row)} cells, header has {len(header)}"
            )
        for out_j, j in enumerate(feat_idx):
            cell = row[j].strip()
            if cell == "":
                raise DataFormatError(
                    f"{path}: missing value at row {line}, column {header[j]!r}"
                )
            try:
                value = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric cell {cell!r} at row {line}, column {header[j]!r}"
                ) from None
            if not math.isfinite(value):
                raise DataFormatError(
                    f"{path}: non-finite value {cell!r} at row {line}, column {header[j]!r}"
                )
            x[i, out_j] = value
        if label_idx is not None:
            lab = row[label_idx].strip()
            if lab == "":
                raise DataFormatError(
                    f"{path}: missing label at row {line}, column {label_column!r}"
                )
            labels.append(lab)
    return Dataset(x, np.array(labels) if label_idx is not None else None)


def save_dataset(
    dataset: Dataset,
    path,
    label_column: str = "label",
    feature_names: Optional[Sequence[str]] = None,
) -> None:
    """Write ``dataset`` in the format read by :func:`load_dataset`.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    names = list(feature_names) if feature_names is not None else [
        f"f{j + 1}" for j in range(dataset.d)
    ]
    if len(names) != dataset.d:
        raise ValueError("feature_names length must equal d")
    header = names + ([label_column] if dataset.labeled else [])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[i]]
            if dataset.labeled:
                row.append(str(dataset.labels[i]))
            w.writerow(row)


def save_labels(labels, path, label_column: str = "label") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label_column])
        for lab in labels:
            w.writerow([str(lab)])


def load_labels(path, label_column: str = "label") -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file (no header row)")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataFormatError(
            f"{path}: label column {label_column!r} not found in header {header}"
        )
    j = header.index(label_column)
    out = []
    for i, row in enumerate(r for r in rows[1:] if r):
        if j >= len(row) or row[j].strip() == "":
            raise DataFormatError(f"{path}: missing label at row {i + 2}")
        out.append(row[j].strip())
    if not out:
        raise DataFormatError(f"{path}: no label rows")
    return np.array(out)


def scaling_stats(x: np.ndarray):
    """Column means and divisors (population std, 1 for constant columns)."""
    constant = np.ptp(x, axis=0) == 0
    # the float mean of a constant column can miss the value by rounding
    mean = np.where(constant, x[0], x.mean(axis=0))
    std = x.std(axis=0)
    scale = np.where(constant | (std == 0), 1.0, std)
    return mean, scale


def apply_scaling(x: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return (x - mean) / scale


def standardize(pair: DomainPair, mode: str = "per-domain") -> DomainPair:
    """Z-score every feature column.

    ``mode="per-domain"`` uses each domain's own statistics; ``"pooled"`` uses
    statistics of the stacked source and target rows for both.
    """
    mean_s, scale_s, mean_t, scale_t = standardization_params(pair, mode)
    return DomainPair(
        Dataset(apply_scaling(pair.source.features, mean_s, scale_s), pair.source.labels),
        Dataset(apply_scaling(pair.target.features, mean_t, scale_t)),
        pair.target_truth,
    )


def standardization_params(pair: DomainPair, mode: str = "per-domain"):
    if mode == "per-domain":
        return (*scaling_stats(pair.source.features), *scaling_stats(pair.target.features))
    if mode == "pooled":
        mean, scale = scaling_stats(
            np.vstack([pair.source.features, pair.target.features])
        )
        return mean, scale, mean, scale
    raise ValueError(f"unknown standardization mode {mode!r}")


# Two isotropic blobs separated along the first feature.
_CLASS_MEANS = np.array([[-2.0, 0.0], [2.0, 0.0]])
_CLASS_STDS = np.array([0.7, 0.7])


def make_synthetic_shift(
    seed: int,
    n_per_class: int,
    shift=(0.0, 0.0),
    rotation_angle: float = 0.0,
) -> DomainPair:
    """Generate a 2-D, two-class source/target pair with a known shift.

    The target is drawn from the source distribution, rotated by
    ``rotation_angle`` radians about its own centroid, then translated by
    ``shift``. Target labels go to ``target_truth`` only.
    """
    if n_per_class < 5:
        raise ValueError(f"n_per_class must be >= 5, got {n_per_class}")
    shift = np.asarray(shift, dtype=np.float64)
    if shift.shape != (2,):
        raise ValueError(f"shift must have dimension 2, got shape {shift.shape}")
    rng = np.random.default_rng(seed)

    def draw():
        blocks = [
            mean + _CLASS_STDS * rng.standard_normal((n_per_class, 2))
            for mean in _CLASS_MEANS
        ]
        return np.vstack(blocks), np.repeat(np.arange(2), n_per_class)

    xs, ys = draw()
    xt, yt = draw()
    c, s = math.cos(rotation_angle), math.sin(rotation_angle)
    rot = np.array([[c, -s], [s, c]])
    centroid = xt.mean(axis=0)
    xt = (xt - centroid) @ rot.T + centroid + shift
    return DomainPair(Dataset(xs, ys), Dataset(xt), yt)
