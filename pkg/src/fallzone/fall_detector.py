"""Fall detection: a cheap impact/rapid-change gate in front of boosted kNN.

A window can only raise a fall when its peak acceleration magnitude or its
rapid-change score reaches the gate thresholds; the boosted classifier then
decides Fall vs NonFall on standardised window features.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .core import UNKNOWN, BehaviorLabel, Timestamp
from .errors import InsufficientData, InvariantViolation, SingleClass
from .features import FEATURE_DIM, IDX_MAG_MAX, IDX_RAPID_CHANGE, Window, window_features
from .learners import (
    BoostedEnsemble,
    ConfusionMatrix,
    Dataset,
    adaboost_fit,
    adaboost_scores,
    cross_validate,
)
from .learners.io import decode, encode, model_from_dict, model_to_dict

NON_FALL, FALL = 0, 1
MIN_WINDOWS_PER_CLASS = 10


@dataclass(frozen=True)
class FallConfig:
    k: int = 5
    rounds: int = 10
    folds: int = 5
    seed: int = 7
    magnitude_g: float = 1.8
    angle_deg_per_step: float = 25.0


@dataclass(frozen=True)
class FallEvent:
    t_start: Timestamp
    t_end: Timestamp
    confidence: float
    zone_id: Optional[str]
    rapid_change: float
    peak_g: float

    def __post_init__(self) -> None:
        if self.t_start.millis > self.t_end.millis:
            raise InvariantViolation("fall event ends before it starts")

    def line(self) -> str:
        zone = self.zone_id if self.zone_id is not None else UNKNOWN
        return f"FALL {self.t_start.millis} {self.t_end.millis} {zone} {self.confidence:.3f}"


@dataclass(frozen=True)
class FallModel:
    ensemble: BoostedEnsemble
    mean: np.ndarray
    scale: np.ndarray
    magnitude_g: float = 1.8
    angle_deg_per_step: float = 25.0
    positive_class: int = FALL
    cv: Optional[ConfusionMatrix] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not (self.magnitude_g > 0 and self.angle_deg_per_step > 0):
            raise InvariantViolation("gate thresholds must be positive")

    def standardise(self, X: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(X) - self.mean) / self.scale

    def to_bytes(self) -> bytes:
        return encode({
            "kind": "fall", "n_features": int(len(self.mean)),
            "ensemble": model_to_dict(self.ensemble),
            "mean": self.mean.tolist(), "scale": self.scale.tolist(),
            "magnitude_g": self.magnitude_g, "angle_deg_per_step": self.angle_deg_per_step,
            "positive_class": self.positive_class,
            "cv": None if self.cv is None else self.cv.counts.tolist(),
        })

    @classmethod
    def from_bytes(cls, data: bytes, n_features: Optional[int] = FEATURE_DIM) -> FallModel:
        doc = decode(data, "fall", n_features)
        return cls(model_from_dict(doc["ensemble"]), np.array(doc["mean"]), np.array(doc["scale"]),
                   float(doc["magnitude_g"]), float(doc["angle_deg_per_step"]), int(doc["positive_class"]),
                   None if doc["cv"] is None else ConfusionMatrix(np.array(doc["cv"], dtype=np.int64)))


def binary_labels(labels: Sequence[BehaviorLabel]) -> np.ndarray:
    return np.array([FALL if lab.is_fall else NON_FALL for lab in labels], dtype=np.int64)


def _standardiser(X: np.ndarray):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def _fit(X: np.ndarray, y: np.ndarray, config: FallConfig, cv: Optional[ConfusionMatrix] = None) -> FallModel:
    mean, scale = _standardiser(X)
    ens = adaboost_fit(Dataset((X - mean) / scale, y, 2), config.rounds, config.k, config.seed)
    return FallModel(ens, mean, scale, config.magnitude_g, config.angle_deg_per_step, FALL, cv)


def train_fall_model(X: np.ndarray, labels: Sequence[BehaviorLabel], config: FallConfig = FallConfig()
                     ) -> FallModel:
    """Fit on all windows after storing a cross-validated confusion matrix."""
    X = np.asarray(X, dtype=np.float64)
    y = binary_labels(labels)
    counts = np.bincount(y, minlength=2)
    if np.count_nonzero(counts) < 2:
        raise SingleClass("fall training data holds a single class")
    if counts.min() < MIN_WINDOWS_PER_CLASS:
        raise InsufficientData(f"need >= {MIN_WINDOWS_PER_CLASS} windows per class, got {counts.tolist()}")

    def train(split: Dataset):
        model = _fit(split.X, split.y, config)
        return lambda Q: np.argmax(adaboost_scores(model.ensemble, model.standardise(Q)), axis=1)

    cm = cross_validate(Dataset(X, y, 2), config.folds, train, config.seed)
    return _fit(X, y, config, cm)


def passes_gate(model: FallModel, features: np.ndarray) -> bool:
    return bool(features[IDX_MAG_MAX] >= model.magnitude_g
                or features[IDX_RAPID_CHANGE] >= model.angle_deg_per_step)


def fall_confidence(model: FallModel, X: np.ndarray) -> np.ndarray:
    """Alpha-weighted vote share of the Fall class, per row."""
    scores = adaboost_scores(model.ensemble, model.standardise(X))
    return scores[:, model.positive_class] / scores.sum(axis=1)


def classify_windows(model: FallModel, X: np.ndarray) -> np.ndarray:
    """Per-window fall confidence, or NaN where the gate rejects the window."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.full(len(X), np.nan)
    gated = np.array([passes_gate(model, x) for x in X], dtype=bool)
    if gated.any():
        idx = np.flatnonzero(gated)
        scores = adaboost_scores(model.ensemble, model.standardise(X[idx]))
        is_fall = np.argmax(scores, axis=1) == model.positive_class
        conf = scores[:, model.positive_class] / scores.sum(axis=1)
        out[idx[is_fall]] = conf[is_fall]
    return out


def event_from_features(model: FallModel, features: np.ndarray, t_start: Timestamp, t_end: Timestamp
                        ) -> Optional[FallEvent]:
    conf = classify_windows(model, features)[0]
    if np.isnan(conf):
        return None
    return FallEvent(t_start, t_end, float(conf), None, float(features[IDX_RAPID_CHANGE]),
                     float(features[IDX_MAG_MAX]))


def detect(model: FallModel, window: Window) -> Optional[FallEvent]:
    features = window_features(window)
    return event_from_features(model, features, window.samples[0].t, window.samples[-1].t)


def merge_events(events: Iterable[FallEvent], stride_ms: int) -> List[FallEvent]:
    """Merge time-ordered events separated by less than one stride."""
    merged: List[FallEvent] = []
    for ev in sorted(events, key=lambda e: e.t_start.millis):
        if merged and ev.t_start.millis - merged[-1].t_end.millis < stride_ms:
            prev = merged[-1]
            end = ev.t_end if ev.t_end.millis > prev.t_end.millis else prev.t_end
            merged[-1] = replace(prev, t_end=end, confidence=max(prev.confidence, ev.confidence),
                                 rapid_change=max(prev.rapid_change, ev.rapid_change),
                                 peak_g=max(prev.peak_g, ev.peak_g))
        else:
            merged.append(ev)
    return merged


def annotate_zone(event: FallEvent, zone_timeline) -> FallEvent:
    """Attach the zone active at the event start (left-closed lookup)."""
    return replace(event, zone_id=zone_timeline.zone_at(event.t_start.millis))
