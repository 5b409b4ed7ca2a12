"""Activity-zone localization.

Beacon reports are fused into a zone timeline; a random forest learns to
infer the zone from IMU window features, with its per-window votes averaged
over a short horizon. When both are available the beacon wins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import groupby
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import UNKNOWN, ActivityZoneMap, BeaconEvent, UnifiedRecord
from .errors import DimensionMismatch, InputError, InsufficientData, InvariantViolation, UnknownZoneId
from .features import FEATURE_DIM
from .learners import ConfusionMatrix, Dataset, ForestModel, cross_validate, forest_fit, forest_predict_batch
from .learners.io import decode, encode, model_from_dict, model_to_dict

log = logging.getLogger(__name__)

DEBOUNCE_MS = 500
MIN_WINDOWS_PER_ZONE = 10

Entry = Tuple[int, Optional[str]]


@dataclass(frozen=True)
class ZoneTimeline:
    """Time-sorted (t_ms, zone or None) transitions; None is the Unknown state."""

    entries: Tuple[Entry, ...]
    conflicts: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        for (t0, z0), (t1, z1) in zip(self.entries, self.entries[1:]):
            if t1 < t0 or z0 == z1:
                raise InvariantViolation("zone timeline must be time-sorted without repeated zones")
        object.__setattr__(self, "_times", [t for t, _ in self.entries])

    def zone_at(self, t_ms: int) -> Optional[str]:
        i = int(np.searchsorted(self._times, t_ms, side="right")) - 1
        return None if i < 0 else self.entries[i][1]

    def lines(self) -> List[str]:
        return [f"ZONE {t} {z if z is not None else UNKNOWN}" for t, z in self.entries]


def debounce(changes: Sequence[Entry], debounce_ms: int = DEBOUNCE_MS) -> List[Entry]:
    """Drop states held for less than ``debounce_ms``, then collapse repeats.

    A surviving change keeps its original onset time. The final state is
    always kept because its hold time is open-ended.
    """
    kept = [c for c, nxt in zip(changes, list(changes[1:]) + [None])
            if nxt is None or nxt[0] - c[0] >= debounce_ms]
    out: List[Entry] = []
    for t, z in kept:
        if not out or out[-1][1] != z:
            out.append((t, z))
    return out


def fuse_beacons(events: Sequence[BeaconEvent], zone_map: ActivityZoneMap,
                 debounce_ms: int = DEBOUNCE_MS) -> ZoneTimeline:
    """Active zone = the zone whose latest report is "present".

    Reports sharing a timestamp are applied together. Several present zones
    resolve to the earliest in map order and count as one conflict episode.
    """
    for ev in events:
        if ev.zone_id not in zone_map:
            raise UnknownZoneId(ev.zone_id)
    ordered = sorted(events, key=lambda e: e.t.millis)
    state: Dict[str, bool] = {}
    changes: List[Entry] = []
    conflicts = 0
    in_conflict = False
    for t, group in groupby(ordered, key=lambda e: e.t.millis):
        for ev in group:
            state[ev.zone_id] = ev.present
        present = [z for z in zone_map.ids if state.get(z)]
        if len(present) > 1 and not in_conflict:
            conflicts += 1
        in_conflict = len(present) > 1
        zone = present[0] if present else None
        if not changes or changes[-1][1] != zone:
            changes.append((t, zone))
    return ZoneTimeline(tuple(debounce(changes, debounce_ms)), conflicts)


def timeline_from_records(records: Sequence[UnifiedRecord], debounce_ms: int = DEBOUNCE_MS) -> ZoneTimeline:
    """Zone timeline from the presence columns of merged records."""
    changes: List[Entry] = []
    for r in records:
        z = r.zone
        if not changes or changes[-1][1] != z:
            changes.append((r.t.millis, z))
    return ZoneTimeline(tuple(debounce(changes, debounce_ms)))


@dataclass(frozen=True)
class ZoneConfig:
    n_trees: int = 100
    max_depth: int = 12
    m: Optional[int] = None
    bootstrap: bool = True
    folds: int = 5
    seed: int = 7
    horizon: int = 3


@dataclass(frozen=True)
class ZoneModel:
    forest: ForestModel
    zone_ids: Tuple[str, ...]
    horizon: int = 3
    cv: Optional[ConfusionMatrix] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "zone_ids", tuple(self.zone_ids))
        if len(set(self.zone_ids)) != len(self.zone_ids) or self.forest.n_classes != len(self.zone_ids):
            raise InvariantViolation("zone label map must be a bijection onto the forest classes")
        if self.horizon < 1:
            raise InvariantViolation("smoothing horizon must be >= 1")

    def to_bytes(self) -> bytes:
        return encode({
            "kind": "zone", "n_features": self.forest.n_features, "forest": model_to_dict(self.forest),
            "zone_ids": list(self.zone_ids), "horizon": self.horizon,
            "cv": None if self.cv is None else self.cv.counts.tolist(),
        })

    @classmethod
    def from_bytes(cls, data: bytes, n_features: Optional[int] = FEATURE_DIM) -> ZoneModel:
        doc = decode(data, "zone", n_features)
        return cls(model_from_dict(doc["forest"]), tuple(doc["zone_ids"]), int(doc["horizon"]),
                   None if doc["cv"] is None else ConfusionMatrix(np.array(doc["cv"], dtype=np.int64)))


def train_zone_model(X: np.ndarray, zone_labels: Sequence[str], zone_map: ActivityZoneMap,
                     config: ZoneConfig = ZoneConfig()) -> ZoneModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.array([zone_map.index(z) for z in zone_labels], dtype=np.int64)
    counts = np.bincount(y, minlength=len(zone_map))
    seen = counts[counts > 0]
    if len(seen) < 2:
        raise InsufficientData("need windows from at least two zones")
    if seen.min() < MIN_WINDOWS_PER_ZONE:
        raise InsufficientData(f"need >= {MIN_WINDOWS_PER_ZONE} windows per zone, got {counts.tolist()}")
    data = Dataset(X, y, len(zone_map))

    def fit(d: Dataset) -> ForestModel:
        return forest_fit(d, config.n_trees, config.max_depth, config.m, config.bootstrap, config.seed)

    cm = cross_validate(data, config.folds, lambda d: fit(d).predict, config.seed)
    return ZoneModel(fit(data), zone_map.ids, config.horizon, cm)


def _check(model: ZoneModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.forest.n_features:
        raise DimensionMismatch(model.forest.n_features, X.shape[1])
    return X


def locate(model: ZoneModel, recent_windows: np.ndarray) -> Tuple[str, float]:
    """Zone from forest votes averaged over the last ``horizon`` windows."""
    X = _check(model, recent_windows)
    if len(X) == 0:
        raise InputError("locate needs at least one window")
    _, fractions = forest_predict_batch(model.forest, X[-model.horizon:])
    avg = fractions.mean(axis=0)
    i = int(np.argmax(avg))
    return model.zone_ids[i], float(avg[i])


def locate_sequence(model: ZoneModel, X: np.ndarray) -> Tuple[List[str], np.ndarray]:
    """``locate`` applied at every position of a window sequence."""
    X = _check(model, X)
    if len(X) == 0:
        return [], np.empty(0)
    _, fractions = forest_predict_batch(model.forest, X)
    csum = np.vstack([np.zeros((1, fractions.shape[1])), np.cumsum(fractions, axis=0)])
    idx = np.arange(1, len(X) + 1)
    lo = np.maximum(idx - model.horizon, 0)
    avg = (csum[idx] - csum[lo]) / (idx - lo)[:, None]
    best = np.argmax(avg, axis=1)
    return [model.zone_ids[i] for i in best], avg[np.arange(len(X)), best]


@dataclass
class Disagreement:
    t_ms: int
    beacon_zone: str
    model_zone: str
    model_confidence: float


def reconcile(beacon_zone: ZoneTimeline, model_zone: Optional[Tuple[Optional[str], float]], t_ms: int,
              disagreements: Optional[List[Disagreement]] = None) -> Optional[str]:
    """Beacon zone when known, else the model's zone; None when neither is."""
    beacon = beacon_zone.zone_at(t_ms)
    model = model_zone[0] if model_zone is not None else None
    if beacon is not None:
        if model is not None and model != beacon:
            log.debug("zone disagreement at %d ms: beacon=%s model=%s", t_ms, beacon, model)
            if disagreements is not None:
                disagreements.append(Disagreement(t_ms, beacon, model, float(model_zone[1])))
        return beacon
    return model
