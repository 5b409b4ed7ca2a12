from datetime import datetime, timezone

import pytest

from fallzone.core import (
    ActivityZoneMap,
    BehaviorLabel,
    ImuSample,
    Rect,
    Timestamp,
    UnifiedRecord,
    Zone,
    default_zone_map,
    format_wall_clock,
    parse_wall_clock,
)
from fallzone.errors import (
    DuplicateZoneId,
    EmptyMap,
    InputError,
    InvariantViolation,
    OverlappingZones,
    UnknownZoneId,
)


def test_default_map_has_four_named_zones():
    zm = default_zone_map()
    assert zm.ids == ("bedroom", "kitchen", "office", "toilet")


def test_identical_rectangles_overlap():
    r = Rect(0, 0, 1, 1)
    with pytest.raises(OverlappingZones):
        ActivityZoneMap((Zone("a", "A", r), Zone("b", "B", r)))


def test_shared_edge_is_not_overlap():
    ActivityZoneMap((Zone("a", "A", Rect(0, 0, 1, 1)), Zone("b", "B", Rect(1, 0, 2, 1))))


def test_empty_map():
    with pytest.raises(EmptyMap):
        ActivityZoneMap(())


def test_duplicate_zone_id():
    with pytest.raises(DuplicateZoneId):
        ActivityZoneMap((Zone("a", "A", Rect(0, 0, 1, 1)), Zone("a", "B", Rect(2, 0, 3, 1))))


def test_unknown_zone_index():
    with pytest.raises(UnknownZoneId):
        default_zone_map().index("garage")


def test_zone_map_text_round_trip():
    zm = default_zone_map()
    assert ActivityZoneMap.parse(zm.dumps()) == zm


def test_zone_map_parse_rejects_bad_line():
    with pytest.raises(InputError):
        ActivityZoneMap.parse("bedroom\tBedroom\t0\t0\n")


def test_degenerate_rect():
    with pytest.raises(InvariantViolation):
        Rect(1, 0, 1, 1)


def test_timestamp_wall_clock():
    start = datetime(2022, 3, 4, 5, 6, 7, tzinfo=timezone.utc)
    t = Timestamp.at(1234, start)
    assert t.wall_clock == "2022-03-04T05:06:08.234Z"
    assert parse_wall_clock(t.wall_clock) == datetime(2022, 3, 4, 5, 6, 8, 234000, tzinfo=timezone.utc)
    assert format_wall_clock(parse_wall_clock(t.wall_clock)) == t.wall_clock


def test_negative_timestamp_rejected():
    with pytest.raises(InvariantViolation):
        Timestamp.at(-1)


def test_imu_sample_range_checks():
    with pytest.raises(InvariantViolation):
        ImuSample(Timestamp.at(0), (17.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    with pytest.raises(InvariantViolation):
        ImuSample(Timestamp.at(0), (float("nan"), 0.0, 0.0), (0.0, 0.0, 0.0))


def test_unified_record_single_zone():
    zm = default_zone_map()
    r = UnifiedRecord.build(Timestamp.at(20), (0, 1, 0), (0, 0, 0), zm.ids, "office")
    assert r.zone == "office"
    assert sum(r.zone_presence.values()) == 1
    assert r.elapsed_s == pytest.approx(0.02)
    with pytest.raises(InvariantViolation):
        UnifiedRecord(r.wall_clock, r.t, r.elapsed_s, r.accel, r.gyro, {"bedroom": True, "office": True})


def test_unknown_zone_record():
    r = UnifiedRecord.build(Timestamp.at(0), (0, 1, 0), (0, 0, 0), ("a", "b"), None)
    assert r.zone is None


def test_behavior_label_parse():
    assert BehaviorLabel.parse("FallSideways").is_fall
    assert not BehaviorLabel.parse("GettingUp").is_fall
    with pytest.raises(InputError):
        BehaviorLabel.parse("Dancing")
