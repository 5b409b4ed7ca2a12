"""Multiclass AdaBoost (SAMME) over kNN weak learners.

kNN ignores instance weights, so each round fits its weak learner on a
weight-proportional bootstrap resample of the training rows. Learners are
stored as resample indices into the shared training set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..errors import DimensionMismatch, EmptyDataset, InvariantViolation, NoUsefulWeakLearner
from ._rng import make_rng
from .data import Dataset
from .knn import KnnModel, knn_predict_batch

log = logging.getLogger(__name__)

EPS_CLAMP = 1e-10
MAX_RETRIES = 10


@dataclass(frozen=True)
class BoostedEnsemble:
    X: np.ndarray
    y: np.ndarray
    n_classes: int
    k: int
    indices: Tuple[np.ndarray, ...]
    alphas: Tuple[float, ...]
    _weak: Tuple[KnnModel, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.alphas or len(self.alphas) != len(self.indices):
            raise InvariantViolation("ensemble needs at least one (learner, alpha) round")
        if not all(math.isfinite(a) for a in self.alphas):
            raise InvariantViolation("non-finite alpha")
        weak = tuple(KnnModel(self.X[i], self.y[i], self.k, self.n_classes) for i in self.indices)
        object.__setattr__(self, "_weak", weak)

    @property
    def rounds(self) -> List[Tuple[KnnModel, float]]:
        return list(zip(self._weak, self.alphas))

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def predict(self, Q) -> np.ndarray:
        return adaboost_predict_batch(self, Q)


@dataclass
class BoostTrace:
    """Per-round diagnostics collected during fitting."""

    errors: List[float] = field(default_factory=list)
    weight_sums: List[float] = field(default_factory=list)
    min_weights: List[float] = field(default_factory=list)
    rejected: int = 0


def samme_alpha(eps: float, n_classes: int) -> float:
    eps = min(max(eps, EPS_CLAMP), 1.0 - EPS_CLAMP)
    return math.log((1.0 - eps) / eps) + math.log(n_classes - 1)


def adaboost_fit(data: Dataset, rounds: int = 10, k_neighbors: int = 5, seed: int = 0,
                 trace: Optional[BoostTrace] = None) -> BoostedEnsemble:
    """Fit a SAMME ensemble.

    A round whose weighted error is at or above 1 - 1/K is redrawn up to ten
    times; if it still fails, boosting stops (or raises on the first round).
    A weak learner with zero weighted error ends boosting after it is accepted.
    """
    if data.n == 0:
        raise EmptyDataset("cannot boost on an empty dataset")
    if rounds < 1:
        raise InvariantViolation("rounds must be >= 1")
    n, K = data.n, data.n_classes
    k = min(k_neighbors, n)
    rng = make_rng(seed, 0xAB)
    w = np.full(n, 1.0 / n)
    indices: List[np.ndarray] = []
    alphas: List[float] = []
    for m in range(rounds):
        accepted = None
        for _ in range(1 + MAX_RETRIES):
            idx = rng.choice(n, size=n, replace=True, p=w)
            weak = KnnModel(data.X[idx], data.y[idx], k, K)
            miss = knn_predict_batch(weak, data.X) != data.y
            eps_raw = float(w[miss].sum())
            eps = min(max(eps_raw, EPS_CLAMP), 1.0 - EPS_CLAMP)
            if trace is not None:
                trace.errors.append(eps_raw)
            if eps < 1.0 - 1.0 / K:
                accepted = (idx, miss, eps, eps_raw)
                break
            if trace is not None:
                trace.rejected += 1
        if accepted is None:
            if not alphas:
                raise NoUsefulWeakLearner(f"no weak learner beat chance after {MAX_RETRIES} retries")
            log.info("boosting stopped early at round %d: no useful weak learner", m)
            break
        idx, miss, eps, eps_raw = accepted
        alpha = samme_alpha(eps, K)
        w = w * np.exp(alpha * miss)
        w /= w.sum()
        indices.append(idx)
        alphas.append(alpha)
        if trace is not None:
            trace.weight_sums.append(float(w.sum()))
            trace.min_weights.append(float(w.min()))
        if eps_raw == 0.0:
            log.info("boosting stopped at round %d: perfect weak learner", m)
            break
    return BoostedEnsemble(data.X, data.y, K, k, tuple(indices), tuple(alphas))


def adaboost_scores(model: BoostedEnsemble, Q) -> np.ndarray:
    """Alpha-weighted class votes, shape (q, K)."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[1] != model.d:
        raise DimensionMismatch(model.d, Q.shape[1])
    scores = np.zeros((Q.shape[0], model.n_classes))
    rows = np.arange(Q.shape[0])
    for weak, alpha in model.rounds:
        scores[rows, knn_predict_batch(weak, Q)] += alpha
    return scores


def adaboost_predict_batch(model: BoostedEnsemble, Q) -> np.ndarray:
    return np.argmax(adaboost_scores(model, Q), axis=1)


def adaboost_predict(model: BoostedEnsemble, query) -> int:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise DimensionMismatch(model.d, q.shape[-1] if q.ndim else 0)
    return int(adaboost_predict_batch(model, q)[0])


def boost_trainer(rounds: int = 10, k_neighbors: int = 5, seed: int = 0) -> Callable:
    """Training function for ``cross_validate``."""
    def train(data: Dataset):
        return adaboost_fit(data, rounds, k_neighbors, seed).predict
    return train
