"""Labeled sample matrices and their CSV representations.

Feature files are CSV with header ``label,f0,...,f{D-1}``; the label column
holds a non-negative integer class id, or ``-1`` for unlabeled rows.
Descriptor files are header-less CSV with one local descriptor per row:
``video_id,v0,...,v{d-1}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, LengthMismatch, NonFiniteInput

UNLABELED = -1


@dataclass
class FeatureSet:
    """A sample matrix with one label (or unlabeled mark) per row."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise LengthMismatch(
                f"{self.labels.shape[0]} labels for {self.features.shape[0]} rows"
            )
        if not np.all(np.isfinite(self.features)):
            raise NonFiniteInput("features contain NaN or Inf")
        if self.labels.size and self.labels.min() < UNLABELED:
            raise DataError("labels must be >= -1")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    def labeled(self) -> "FeatureSet":
        m = self.labeled_mask
        return FeatureSet(self.features[m], self.labels[m])

    def present_classes(self) -> np.ndarray:
        return np.unique(self.labels[self.labeled_mask])


@dataclass
class DescriptorSet:
    """All local descriptors extracted from one video."""

    video_id: str
    descriptors: np.ndarray
    label: int = UNLABELED

    def __post_init__(self) -> None:
        self.descriptors = np.asarray(self.descriptors, dtype=np.float64)
        if self.descriptors.ndim != 2 or self.descriptors.shape[0] < 1:
            raise DataError(f"{self.video_id}: descriptors must be a non-empty matrix")
        if not np.all(np.isfinite(self.descriptors)):
            raise NonFiniteInput(f"{self.video_id}: non-finite descriptor values")


def save_feature_csv(path: str | Path, fs: FeatureSet) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(fs.dim)])
        for label, row in zip(fs.labels, fs.features):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def load_feature_csv(path: str | Path) -> FeatureSet:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty feature file") from None
        if not header or header[0] != "label":
            raise DataError(f"{path}: expected header starting with 'label'")
        labels, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} columns")
            try:
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return FeatureSet(np.array(rows), np.array(labels))


def load_descriptor_csv(path: str | Path) -> list[DescriptorSet]:
    """Read one descriptor file, grouping rows by video id (sorted)."""
    path = Path(path)
    groups: dict[str, list[list[float]]] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: need video_id plus descriptor values")
            try:
                groups.setdefault(row[0], []).append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not groups:
        raise DataError(f"{path}: no descriptor rows")
    return [DescriptorSet(vid, np.array(groups[vid])) for vid in sorted(groups)]


def load_descriptor_dir(directory: str | Path) -> list[DescriptorSet]:
    """Read every ``*.csv`` descriptor file under ``directory``, sorted by name."""
    directory = Path(directory)
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise DataError(f"{directory}: no .csv descriptor files")
    sets: list[DescriptorSet] = []
    for f in files:
        sets.extend(load_descriptor_csv(f))
    return sets


def load_label_map(path: str | Path) -> dict[str, int]:
    """Read a ``video_id,label`` CSV used to attach labels to encoded videos."""
    mapping: dict[str, int] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected video_id,label")
            try:
                mapping[row[0]] = int(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: label must be an integer") from None
    return mapping
