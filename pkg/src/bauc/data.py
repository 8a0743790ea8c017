"""Labelled datasets and CSV ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    pass


class MissingClassError(DatasetError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``(N, P)`` with per-row labels in ``{1, 2}``.

    Class 2 is the positive class.
    """

    features: np.ndarray
    labels: np.ndarray
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels).astype(int)
        if x.ndim != 2:
            raise DatasetError(f"features must be 2-d, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DatasetError(f"{y.size} labels for {x.shape[0]} rows")
        if not np.all(np.isin(y, (1, 2))):
            raise DatasetError("labels must be 1 or 2")
        if not np.all(np.isfinite(x)):
            raise DatasetError("features contain non-finite values")
        if self.columns is not None and len(self.columns) != x.shape[1]:
            raise DatasetError("column names do not match feature count")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        n2 = int(np.count_nonzero(self.labels == 2))
        return self.n - n2, n2

    def class_rows(self, c: int) -> np.ndarray:
        return self.features[self.labels == c]

    def require_both_classes(self) -> None:
        n1, n2 = self.class_counts()
        if n1 == 0 or n2 == 0:
            missing = 1 if n1 == 0 else 2
            raise MissingClassError(f"class {missing} has no samples")

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.columns)

    @classmethod
    def from_classes(cls, x1, x2) -> "Dataset":
        x1 = np.atleast_2d(np.asarray(x1, dtype=float))
        x2 = np.atleast_2d(np.asarray(x2, dtype=float))
        labels = np.concatenate([np.ones(len(x1), int), np.full(len(x2), 2)])
        return cls(np.vstack([x1, x2]), labels)


def load_csv(path, label_column: str | int, positive_label: str) -> Dataset:
    """Read a headed CSV; ``positive_label`` becomes class 2, the other value class 1.

    ``label_column`` is a header name, or an integer column index.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if isinstance(label_column, str) and label_column in header:
        li = header.index(label_column)
    else:
        try:
            li = int(label_column)
        except ValueError:
            raise DatasetError(f"{path}: no label column {label_column!r}") from None
        if not 0 <= li < len(header):
            raise DatasetError(f"{path}: label column index {li} out of range")
    feature_idx = [j for j in range(len(header)) if j != li]
    labels_raw = []
    feats = np.empty((len(body), len(feature_idx)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        lab = row[li].strip()
        if lab == "":
            raise DatasetError(f"{path}: row {r} has a missing label")
        labels_raw.append(lab)
        for k, j in enumerate(feature_idx):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise DatasetError(f"{path}: row {r}, column {header[j]!r}: cannot parse {cell!r}")
            feats[r - 2, k] = v
    seen = list(dict.fromkeys(labels_raw))
    if len(seen) > 2:
        raise DatasetError(
            f"{path}: label column has more than two values; third value {seen[2]!r}"
        )
    if positive_label not in seen:
        raise DatasetError(f"{path}: positive label {positive_label!r} not present")
    labels = np.array([2 if v == positive_label else 1 for v in labels_raw])
    return Dataset(feats, labels, tuple(header[j] for j in feature_idx))


def write_csv(dataset: Dataset, path, label_column: str = "y") -> None:
    """Write features (``repr`` precision) and labels ``1``/``2``."""
    cols = dataset.columns or tuple(f"x{j}" for j in range(dataset.dim))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*cols, label_column])
        for row, lab in zip(dataset.features, dataset.labels):
            w.writerow([*(repr(float(v)) for v in row), int(lab)])
