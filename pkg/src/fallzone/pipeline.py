"""End-to-end glue: session logs -> windows -> detections -> metrics."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import ActivityZoneMap, BehaviorLabel, Timestamp, parse_wall_clock
from .errors import AllDegenerate
from .fall_detector import FallEvent, FallModel, annotate_zone, classify_windows, merge_events
from .features import (
    DEFAULT_STRIDE_S,
    DEFAULT_WINDOW_S,
    FEATURE_DIM,
    IDX_MAG_MAX,
    IDX_RAPID_CHANGE,
    features_from_arrays,
    window_spans,
)
from .gateway.session import SessionLog, merge_streams
from .learners import ConfusionMatrix
from .sim import GroundTruth, SimulatedSession, adl_tour, session_seeds, simulate_session
from .zone_localizer import Disagreement, ZoneModel, ZoneTimeline, locate_sequence, reconcile, timeline_from_records

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SessionWindows:
    """Feature windows of one session log plus the beacon zone of each."""

    X: np.ndarray
    start_ms: np.ndarray
    first_ms: np.ndarray
    last_ms: np.ndarray
    beacon_zone: Tuple[Optional[str], ...]
    session_start: str

    def __len__(self) -> int:
        return len(self.start_ms)


def _majority(values: Sequence, order: Sequence) -> Optional[object]:
    counts = Counter(v for v in values if v is not None)
    if not counts:
        return None
    top = max(counts.values())
    return next(v for v in order if counts.get(v) == top)


def log_windows(log_: SessionLog, window_s: float = DEFAULT_WINDOW_S,
                stride_s: float = DEFAULT_STRIDE_S) -> SessionWindows:
    recs = log_.records
    millis = np.array([r.t.millis for r in recs], dtype=np.int64)
    accel = np.array([r.accel for r in recs], dtype=float).reshape(-1, 3)
    gyro = np.array([r.gyro for r in recs], dtype=float).reshape(-1, 3)
    zones = [r.zone for r in recs]
    X, starts, firsts, lasts, bz = [], [], [], [], []
    for lo, i0, i1 in window_spans(millis, window_s, stride_s):
        try:
            X.append(features_from_arrays(accel[i0:i1], gyro[i0:i1]))
        except AllDegenerate:
            log.info("skipping all-degenerate window at %d ms", lo)
            continue
        starts.append(lo)
        firsts.append(int(millis[i0]))
        lasts.append(int(millis[i1 - 1]))
        bz.append(_majority(zones[i0:i1], log_.zone_ids))
    return SessionWindows(np.array(X).reshape(-1, FEATURE_DIM), np.array(starts, dtype=np.int64),
                          np.array(firsts, dtype=np.int64), np.array(lasts, dtype=np.int64),
                          tuple(bz), log_.session_start)


def window_truth(w: SessionWindows, truth: GroundTruth, zone_ids: Sequence[str],
                 window_s: float = DEFAULT_WINDOW_S) -> Tuple[List[BehaviorLabel], List[Optional[str]]]:
    """Behavior and zone label per window from the scripted ground truth.

    A window is a fall window iff it contains a fall's impact instant;
    otherwise it takes the majority behavior. Zone is the majority zone.
    """
    win_ms = int(round(window_s * 1000))
    period = 1000.0 / truth.sample_rate_hz
    labels, zones = [], []
    for lo, first, last in zip(w.start_ms.tolist(), w.first_ms.tolist(), w.last_ms.tolist()):
        t = np.arange(first, last + 1, period).round().astype(np.int64)
        fall = next((f for f in truth.falls if lo <= f.impact_ms < lo + win_ms), None)
        if fall is not None:
            labels.append(fall.label)
        else:
            labels.append(_majority(truth.label_array(t), list(BehaviorLabel)))
        zones.append(_majority(truth.zone_array(t), zone_ids))
    return labels, zones


@dataclass
class Detection:
    events: List[FallEvent]
    window_start_ms: np.ndarray
    window_zone: List[Optional[str]]
    zone_timeline: ZoneTimeline
    disagreements: List[Disagreement] = field(default_factory=list)

    def lines(self) -> List[str]:
        return [e.line() for e in self.events] + self.zone_timeline.lines()


def detect_session(log_: SessionLog, fall_model: Optional[FallModel], zone_model: Optional[ZoneModel],
                   window_s: float = DEFAULT_WINDOW_S, stride_s: float = DEFAULT_STRIDE_S,
                   use_beacons: bool = True, windows: Optional[SessionWindows] = None) -> Detection:
    """Fall events plus a per-window zone track for one session.

    The zone track is the beacon zone where beacons are known (and allowed),
    otherwise the smoothed forest prediction. Fall events are annotated from
    that same track.
    """
    w = windows if windows is not None else log_windows(log_, window_s, stride_s)
    beacons = timeline_from_records(log_.records) if use_beacons else ZoneTimeline(())
    model_track: List[Optional[Tuple[str, float]]] = [None] * len(w)
    if zone_model is not None and len(w):
        names, conf = locate_sequence(zone_model, w.X)
        model_track = list(zip(names, conf.tolist()))
    disagreements: List[Disagreement] = []
    window_zone = [reconcile(beacons, mz, int(t), disagreements) for mz, t in zip(model_track, w.start_ms)]

    changes: List[Tuple[int, Optional[str]]] = []
    for t, z in zip(w.start_ms.tolist(), window_zone):
        if not changes or changes[-1][1] != z:
            changes.append((t, z))
    track = ZoneTimeline(tuple(changes))

    events: List[FallEvent] = []
    if fall_model is not None and len(w):
        start = log_.session_start
        conf = classify_windows(fall_model, w.X)
        for i in np.flatnonzero(~np.isnan(conf)):
            events.append(FallEvent(_ts(w.first_ms[i], start), _ts(w.last_ms[i], start), float(conf[i]), None,
                                    float(w.X[i, IDX_RAPID_CHANGE]), float(w.X[i, IDX_MAG_MAX])))
        events = merge_events(events, int(round(stride_s * 1000)))
        lookup = track if zone_model is not None else beacons
        events = [annotate_zone(e, lookup) for e in events]
    return Detection(events, w.start_ms, window_zone, track, disagreements)


def _ts(millis, session_start: str) -> Timestamp:
    return Timestamp.at(int(millis), parse_wall_clock(session_start)) if session_start else Timestamp.at(int(millis))


# -- evaluation -------------------------------------------------------------

@dataclass
class Metrics:
    fall_tp: int
    fall_fp: int
    fall_fn: int
    zone_cm: ConfusionMatrix
    zone_ids: Tuple[str, ...]
    event_zone_matches: int = 0
    event_zone_known: int = 0

    @property
    def fall_precision(self) -> float:
        n = self.fall_tp + self.fall_fp
        return self.fall_tp / n if n else 1.0

    @property
    def fall_recall(self) -> float:
        n = self.fall_tp + self.fall_fn
        return self.fall_tp / n if n else 1.0

    @property
    def fall_f1(self) -> float:
        p, r = self.fall_precision, self.fall_recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def zone_accuracy(self) -> float:
        total = self.zone_cm.total
        return float(np.trace(self.zone_cm.counts)) / total if total else 0.0

    def __add__(self, other: Metrics) -> Metrics:
        return Metrics(self.fall_tp + other.fall_tp, self.fall_fp + other.fall_fp, self.fall_fn + other.fall_fn,
                       ConfusionMatrix(self.zone_cm.counts + other.zone_cm.counts), self.zone_ids,
                       self.event_zone_matches + other.event_zone_matches,
                       self.event_zone_known + other.event_zone_known)

    def as_dict(self) -> Dict[str, float]:
        out: Dict[str, float] = {
            "fall_tp": self.fall_tp, "fall_fp": self.fall_fp, "fall_fn": self.fall_fn,
            "fall_precision": self.fall_precision, "fall_recall": self.fall_recall, "fall_f1": self.fall_f1,
            "zone_windows": self.zone_cm.total, "zone_accuracy": self.zone_accuracy,
            "event_zone_matches": self.event_zone_matches, "event_zone_known": self.event_zone_known,
        }
        for z, p, r in zip(self.zone_ids, self.zone_cm.precision(), self.zone_cm.recall()):
            out[f"zone_precision.{z}"] = float(p)
            out[f"zone_recall.{z}"] = float(r)
        return out

    def report(self) -> str:
        lines = ["zone confusion matrix (rows = truth):", self.zone_cm.format(list(self.zone_ids)), "",
                 f"zone accuracy        {self.zone_accuracy:.4f}",
                 f"fall events          TP={self.fall_tp} FP={self.fall_fp} FN={self.fall_fn}",
                 f"fall precision       {self.fall_precision:.4f}",
                 f"fall recall          {self.fall_recall:.4f}",
                 f"fall F1              {self.fall_f1:.4f}", ""]
        for k, v in self.as_dict().items():
            lines.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
        return "\n".join(lines) + "\n"


def evaluate(events: Sequence[FallEvent], window_start_ms: Sequence[int], window_zone: Sequence[Optional[str]],
             truth: GroundTruth, zone_ids: Sequence[str], window_s: float = DEFAULT_WINDOW_S) -> Metrics:
    """Event-level fall metrics and window-level zone accuracy.

    An event is a true positive when its [t_start, t_end] span overlaps a
    scripted fall interval; a scripted fall with no overlapping event is a
    miss. Zone truth per window is the majority scripted zone of the window.
    """
    def overlaps(e: FallEvent, f) -> bool:
        return e.t_start.millis < f.end_ms and f.start_ms <= e.t_end.millis

    tp = sum(1 for e in events if any(overlaps(e, f) for f in truth.falls))
    fn = sum(1 for f in truth.falls if not any(overlaps(e, f) for e in events))
    matches = known = 0
    for e in events:
        hit = next((f for f in truth.falls if overlaps(e, f)), None)
        if hit is not None and e.zone_id is not None:
            known += 1
            matches += e.zone_id == hit.zone_id
    win_ms = int(round(window_s * 1000))
    period = 1000.0 / truth.sample_rate_hz
    index = {z: i for i, z in enumerate(zone_ids)}
    y_true, y_pred = [], []
    for lo, pred in zip(window_start_ms, window_zone):
        t = np.arange(lo, min(lo + win_ms, truth.end_ms), period).round().astype(np.int64)
        gt = _majority(truth.zone_array(t), zone_ids) if len(t) else None
        if gt is None:
            continue
        y_true.append(index[gt])
        # an Unknown prediction is always wrong: score it as the next zone over
        y_pred.append(index[pred] if pred is not None else (index[gt] + 1) % len(zone_ids))
    cm = ConfusionMatrix.from_predictions(np.array(y_true, dtype=np.int64), np.array(y_pred, dtype=np.int64),
                                          len(zone_ids))
    return Metrics(tp, len(events) - tp, fn, cm, tuple(zone_ids), matches, known)


# -- corpora ------------------------------------------------------------------

def ingest(session: SimulatedSession, zone_map: ActivityZoneMap, tolerance_ms: int = 2000,
           session_id: str = "session") -> SessionLog:
    return merge_streams(session.imu_frames, session.beacon_frames, zone_map, tolerance_ms, session_id)


def simulate_corpus(zone_map: ActivityZoneMap, n_sessions: int = 20, seed: int = 7,
                    duration_s: float = 180.0, fall_fraction: float = 0.1) -> List[SimulatedSession]:
    return [simulate_session(adl_tour(zone_map, duration_s, s, fall_fraction), zone_map)
            for s in session_seeds(seed, n_sessions)]


def training_windows(logs: Sequence[SessionLog], truths: Sequence[GroundTruth], zone_map: ActivityZoneMap,
                     window_s: float = DEFAULT_WINDOW_S, stride_s: float = DEFAULT_STRIDE_S
                     ) -> Tuple[np.ndarray, List[BehaviorLabel], List[Optional[str]]]:
    """Stack windows of several sessions: features, behavior labels, beacon zones."""
    Xs, labels, zones = [], [], []
    for lg, tr in zip(logs, truths):
        w = log_windows(lg, window_s, stride_s)
        lab, _ = window_truth(w, tr, zone_map.ids, window_s)
        Xs.append(w.X)
        labels += lab
        zones += list(w.beacon_zone)
    return np.vstack(Xs) if Xs else np.empty((0, FEATURE_DIM)), labels, zones
