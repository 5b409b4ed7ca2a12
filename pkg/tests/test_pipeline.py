import numpy as np
import pytest

from fallzone.core import BehaviorLabel as B, Timestamp
from fallzone.fall_detector import FallEvent
from fallzone.pipeline import detect_session, evaluate, log_windows, window_truth
from fallzone.sim import FallInterval, GroundTruth, TruthSegment


def test_windows_cover_session(corpus):
    sessions, logs = corpus
    w = log_windows(logs[0])
    assert len(w) == len(w.X) == len(w.beacon_zone)
    assert np.all(np.diff(w.start_ms) == 1000)
    assert w.first_ms[0] == 0 and w.last_ms[-1] == logs[0].records[-1].t.millis


def test_fall_windows_contain_impacts(corpus, zone_map):
    sessions, logs = corpus
    w = log_windows(logs[0])
    labels, zones = window_truth(w, sessions[0].truth, zone_map.ids)
    n_falls = len(sessions[0].truth.falls)
    # each impact lies in exactly two overlapping 2 s windows
    assert sum(lab.is_fall for lab in labels) == 2 * n_falls
    assert all(z is not None for z in zones)


def test_detect_with_beacons_annotates_true_zone(corpus, fall_model):
    sessions, logs = corpus
    for s, lg in zip(sessions, logs):
        det = detect_session(lg, fall_model, None)
        for f in s.truth.falls:
            hits = [e for e in det.events if e.t_start.millis < f.end_ms and f.start_ms <= e.t_end.millis]
            assert hits, f
            assert all(e.zone_id == f.zone_id for e in hits)


def _truth():
    segs = (TruthSegment(B.STANDING, "a", 0, 4000), TruthSegment(B.FALL_FORWARD, "b", 4000, 5000),
            TruthSegment(B.LYING_DOWN, "b", 5000, 10000))
    return GroundTruth(segs, (FallInterval(4000, 5000, 4960, "b", B.FALL_FORWARD),), 50.0)


def fe(t0, t1, zone="b"):
    return FallEvent(Timestamp.at(t0), Timestamp.at(t1), 0.9, zone, 40.0, 2.5)


def test_evaluate_event_matching():
    m = evaluate([fe(4000, 5980), fe(8000, 9000)], [0, 4000, 8000], ["a", "b", "a"], _truth(), ("a", "b"))
    assert (m.fall_tp, m.fall_fp, m.fall_fn) == (1, 1, 0)
    assert m.fall_precision == 0.5 and m.fall_recall == 1.0
    assert m.fall_f1 == pytest.approx(2 / 3)
    assert m.zone_cm.counts.tolist() == [[1, 0], [1, 1]]
    assert m.zone_accuracy == pytest.approx(2 / 3)
    assert (m.event_zone_matches, m.event_zone_known) == (1, 1)


def test_evaluate_missed_fall_and_unknown_zone():
    m = evaluate([], [0], [None], _truth(), ("a", "b"))
    assert (m.fall_tp, m.fall_fn) == (0, 1) and m.fall_f1 == 0.0
    assert m.zone_accuracy == 0.0


def test_metrics_report_has_key_values():
    m = evaluate([fe(4000, 5980)], [0], ["a"], _truth(), ("a", "b"))
    kv = dict(line.split("=", 1) for line in m.report().splitlines() if "=" in line and " " not in line)
    assert kv["fall_f1"] == "1" and kv["zone_accuracy"] == "1"
    assert "zone_recall.a" in kv
