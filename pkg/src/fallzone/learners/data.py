"""Datasets, confusion matrices, and stratified k-fold cross-validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import EmptyDataset, EmptyMatrix, InvariantViolation, TooFewRows
from ._rng import Seed, make_rng

Predictor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise InvariantViolation(f"feature matrix must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvariantViolation("label vector does not match row count")
        if self.n_classes < 2:
            raise InvariantViolation("need at least two classes")
        if X.shape[1] < 1:
            raise InvariantViolation("need at least one feature")
        if len(y) and (y.min() < 0 or y.max() >= self.n_classes):
            raise InvariantViolation("label outside [0, n_classes)")
        if not np.all(np.isfinite(X)):
            raise InvariantViolation("non-finite feature value")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> Dataset:
        return Dataset(self.X[idx], self.y[idx], self.n_classes)

    def require_rows(self) -> None:
        if self.n == 0:
            raise EmptyDataset("dataset has no rows")


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> ConfusionMatrix:
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def precision(self) -> np.ndarray:
        col = self.counts.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(col > 0, np.diag(self.counts) / np.maximum(col, 1), np.nan)

    def recall(self) -> np.ndarray:
        row = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(row > 0, np.diag(self.counts) / np.maximum(row, 1), np.nan)

    def format(self, names: Optional[list] = None) -> str:
        k = self.counts.shape[0]
        names = [str(n) for n in (names or range(k))]
        width = max(8, *(len(n) for n in names), len(str(self.counts.max(initial=0))))
        lines = ["true\\pred".ljust(width) + "".join(n.rjust(width + 1) for n in names)]
        for name, row in zip(names, self.counts):
            lines.append(name.ljust(width) + "".join(str(int(c)).rjust(width + 1) for c in row))
        return "\n".join(lines)


def cm_accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix has no counts")
    return float(np.trace(cm.counts)) / total


def stratified_folds(y: np.ndarray, folds: int, seed: Seed) -> np.ndarray:
    """Fold id per row.

    Rows of each class are shuffled and dealt round-robin; the dealing position
    carries over from one class to the next so overall fold sizes stay balanced.
    """
    y = np.asarray(y)
    n = len(y)
    if folds < 2 or folds > n:
        raise TooFewRows(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    rng = make_rng(seed, 0xCF)
    assignment = np.empty(n, dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        assignment[members] = (offset + np.arange(len(members))) % folds
        offset = (offset + len(members)) % folds
    return assignment


def cross_validate(data: Dataset, folds: int, train_fn: Callable[[Dataset], Predictor],
                   seed: Seed) -> ConfusionMatrix:
    """Out-of-fold predictions of ``train_fn`` models, aggregated into one matrix.

    ``train_fn`` receives the training split and returns a batch predictor.
    """
    assignment = stratified_folds(data.y, folds, seed)
    y_pred = np.empty(data.n, dtype=np.int64)
    for f in range(folds):
        test = assignment == f
        predict = train_fn(data.subset(np.flatnonzero(~test)))
        y_pred[test] = predict(data.X[test])
    return ConfusionMatrix.from_predictions(data.y, y_pred, data.n_classes)
