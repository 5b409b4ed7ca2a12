import numpy as np
import pytest

from fallzone.core import BehaviorLabel as B, ImuSample, Timestamp
from fallzone.errors import InsufficientData, InvariantViolation, SingleClass
from fallzone.fall_detector import (
    FALL,
    FallConfig,
    FallEvent,
    FallModel,
    annotate_zone,
    classify_windows,
    detect,
    merge_events,
    passes_gate,
    train_fall_model,
)
from fallzone.features import IDX_MAG_MAX, IDX_RAPID_CHANGE, Window, make_windows
from fallzone.learners import cm_accuracy
from fallzone.sim import UPRIGHT, generate_segment, segment_arrays
from fallzone.zone_localizer import ZoneTimeline


def window_of(accel, gyro, t0=0):
    samples = tuple(ImuSample(Timestamp.at(t0 + 20 * i), tuple(a), tuple(g))
                    for i, (a, g) in enumerate(zip(accel.tolist(), gyro.tolist())))
    return Window(samples, samples[0].t, 2.0)


def test_cv_accuracy_on_window_corpus(fall_model):
    assert fall_model.cv is not None
    assert cm_accuracy(fall_model.cv) >= 0.95


def test_single_class_rejected(window_corpus):
    X, labels = window_corpus
    keep = [i for i, lab in enumerate(labels) if not lab.is_fall]
    with pytest.raises(SingleClass):
        train_fall_model(X[keep], [labels[i] for i in keep])


def test_too_few_falls_rejected(window_corpus):
    X, labels = window_corpus
    falls = [i for i, lab in enumerate(labels) if lab.is_fall][:5]
    keep = falls + [i for i, lab in enumerate(labels) if not lab.is_fall]
    with pytest.raises(InsufficientData):
        train_fall_model(X[keep], [labels[i] for i in keep])


def test_training_deterministic(window_corpus):
    X, labels = window_corpus
    cfg = FallConfig(rounds=3, folds=3)
    assert train_fall_model(X, labels, cfg).to_bytes() == train_fall_model(X, labels, cfg).to_bytes()


def test_model_bytes_round_trip(fall_model):
    blob = fall_model.to_bytes()
    back = FallModel.from_bytes(blob)
    assert back.to_bytes() == blob
    assert back.positive_class == FALL


def test_thresholds_positive(fall_model):
    with pytest.raises(InvariantViolation):
        FallModel(fall_model.ensemble, fall_model.mean, fall_model.scale, magnitude_g=0.0)


def test_standing_window_gated_out(fall_model):
    seg = generate_segment(B.STANDING, 2.0, noise_g=0.03, rng=np.random.default_rng(7))
    assert detect(fall_model, make_windows(seg)[0]) is None


def test_forward_fall_detected(fall_model):
    rng = np.random.default_rng(7)
    a1, g1, p, _ = segment_arrays(B.STANDING, 1.0, 50, 0.03, 2.0, rng)
    a2, g2, _, _ = segment_arrays(B.FALL_FORWARD, 1.0, 50, 0.03, 2.0, rng, p)
    ev = detect(fall_model, window_of(np.vstack([a1, a2]), np.vstack([g1, g2])))
    assert ev is not None and ev.confidence > 0.5
    assert ev.peak_g >= 2.2 and ev.rapid_change >= 25


def test_slow_lie_down_not_detected(fall_model):
    kin_rng = np.random.default_rng(3)
    from fallzone.sim import Kinematics
    accel, gyro, _, _ = segment_arrays(B.LYING_DOWN, 4.0, 50, 0.03, 2.0, kin_rng, UPRIGHT,
                                       Kinematics(lie_transition_s=4.0))
    for lo in range(0, 150, 50):
        assert detect(fall_model, window_of(accel[lo:lo + 100], gyro[lo:lo + 100])) is None


def test_gate_is_necessary(fall_model):
    # a fall-looking feature vector with both gate features pushed below threshold
    X = np.tile(fall_model.mean, (3, 1))
    X[:, IDX_MAG_MAX] = 1.2
    X[:, IDX_RAPID_CHANGE] = 10.0
    assert np.all(np.isnan(classify_windows(fall_model, X)))
    assert not passes_gate(fall_model, X[0])


def test_detect_is_pure(fall_model, window_corpus):
    X, _ = window_corpus
    assert np.array_equal(classify_windows(fall_model, X), classify_windows(fall_model, X), equal_nan=True)


def ev(t0, t1, conf=0.9):
    return FallEvent(Timestamp.at(t0), Timestamp.at(t1), conf, None, 40.0, 2.5)


def test_merge_events():
    merged = merge_events([ev(3000, 4980, 0.7), ev(0, 1980), ev(1000, 2980)], 1000)
    assert [(e.t_start.millis, e.t_end.millis) for e in merged] == [(0, 4980)]
    assert merged[0].confidence == 0.9
    apart = merge_events([ev(0, 1980), ev(5000, 6980)], 1000)
    assert len(apart) == 2


def test_event_invariant():
    with pytest.raises(InvariantViolation):
        ev(10, 5)


def test_annotate_zone():
    tl = ZoneTimeline(((0, "bedroom"), (5000, None), (8000, "kitchen")))
    assert annotate_zone(ev(1000, 2000), tl).zone_id == "bedroom"
    assert annotate_zone(ev(6000, 7000), tl).zone_id is None
    assert annotate_zone(ev(8000, 9000), tl).zone_id == "kitchen"
    assert annotate_zone(ev(7999, 9000), tl).zone_id is None


def test_event_line():
    e = annotate_zone(ev(1000, 2980, 0.87654), ZoneTimeline(((0, "office"),)))
    assert e.line() == "FALL 1000 2980 office 0.877"
    assert ev(0, 1).line().split()[3] == "UNKNOWN"
