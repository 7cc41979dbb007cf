"""Confusion matrices and macro-averaged classification metrics."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class Metrics(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], k: int) -> np.ndarray:
    """Rows are true labels, columns predictions."""
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
    return cm


def compute_metrics(cm) -> Metrics:
    """Accuracy plus macro precision, recall and F1.

    A class nobody predicted has precision 0; a class with no true samples
    has recall 0. Both still count in the macro average.
    """
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(predicted > 0, tp / predicted, 0.0)
        r = np.where(actual > 0, tp / actual, 0.0)
        f1 = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return Metrics(float(tp.sum() / total), float(p.mean()), float(r.mean()), float(f1.mean()))
