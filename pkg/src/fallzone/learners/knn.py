"""Exact brute-force k-nearest-neighbour classifier (Euclidean).

Tie rules: among equidistant rows the earlier-inserted row is nearer; among
equal vote counts the lowest class index wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyDataset, InvariantViolation
from .data import Dataset

_CHUNK = 256


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    n_classes: int

    def __post_init__(self) -> None:
        if len(self.y) == 0:
            raise EmptyDataset("kNN needs at least one training row")
        if not 1 <= self.k <= len(self.y):
            raise InvariantViolation(f"k={self.k} outside [1, {len(self.y)}]")

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def predict(self, Q: np.ndarray) -> np.ndarray:
        return knn_predict_batch(self, Q)


def knn_fit(data: Dataset, k: int = 5) -> KnnModel:
    return KnnModel(data.X, data.y, k, data.n_classes)


def squared_distances(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, shape (len(Q), len(X))."""
    out = np.empty((Q.shape[0], X.shape[0]))
    for lo in range(0, Q.shape[0], _CHUNK):
        diff = Q[lo:lo + _CHUNK, None, :] - X[None, :, :]
        out[lo:lo + _CHUNK] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _check_dim(model: KnnModel, Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[1] != model.d:
        raise DimensionMismatch(model.d, Q.shape[1])
    return Q


def neighbour_mask(D: np.ndarray, k: int) -> np.ndarray:
    """Boolean (q, n) mask selecting the k nearest columns of each row of D."""
    kth = np.partition(D, k - 1, axis=1)[:, k - 1:k]
    below = D < kth
    need = k - below.sum(axis=1, keepdims=True)
    equal = D == kth
    return below | (equal & (np.cumsum(equal, axis=1) <= need))


def knn_votes(model: KnnModel, Q: np.ndarray) -> np.ndarray:
    """Neighbour vote counts per class, shape (q, K)."""
    Q = _check_dim(model, Q)
    votes = np.empty((Q.shape[0], model.n_classes), dtype=np.int64)
    onehot = model.y[None, :] == np.arange(model.n_classes)[:, None]
    for lo in range(0, Q.shape[0], _CHUNK):
        mask = neighbour_mask(squared_distances(Q[lo:lo + _CHUNK], model.X), model.k)
        votes[lo:lo + _CHUNK] = mask.astype(np.int64) @ onehot.T.astype(np.int64)
    return votes


def knn_predict_batch(model: KnnModel, Q: np.ndarray) -> np.ndarray:
    return np.argmax(knn_votes(model, Q), axis=1)


def knn_predict(model: KnnModel, query) -> int:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise DimensionMismatch(model.d, q.shape[-1] if q.ndim else 0)
    return int(knn_predict_batch(model, q)[0])
