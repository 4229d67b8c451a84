"""Evaluation report: confusion matrix and mean per-class precision."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadConfig, LengthMismatch


@dataclass
class EvalReport:
    """Per-class recognition precisions and their mean over all classes.

    Rows of the confusion matrix are true classes; the per-class precision is
    the diagonal fraction of its row, and the average precision is the mean
    over classes present in the truth.
    """

    per_class_precision: np.ndarray
    average_precision: float
    confusion: np.ndarray
    metadata: dict = field(default_factory=dict)


def evaluate(predictions: np.ndarray, truth: np.ndarray, class_count: int) -> EvalReport:
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape:
        raise LengthMismatch(
            f"{predictions.shape[0]} predictions for {truth.shape[0]} truth labels"
        )
    if class_count < 1:
        raise BadConfig("class_count must be positive")
    if truth.size and (truth.min() < 0 or truth.max() >= class_count):
        raise BadConfig(f"truth labels must lie in [0, {class_count})")
    if predictions.size and (predictions.min() < 0 or predictions.max() >= class_count):
        raise BadConfig(f"predictions must lie in [0, {class_count})")
    confusion = np.zeros((class_count, class_count), dtype=np.int64)
    for t, p in zip(truth, predictions):
        confusion[t, p] += 1
    row_sums = confusion.sum(axis=1)
    present = row_sums > 0
    precision = np.full(class_count, np.nan)
    precision[present] = confusion.diagonal()[present] / row_sums[present]
    ap = float(np.mean(precision[present])) if present.any() else float("nan")
    return EvalReport(
        per_class_precision=precision,
        average_precision=ap,
        confusion=confusion,
    )
