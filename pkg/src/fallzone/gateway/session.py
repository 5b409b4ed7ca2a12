"""Time alignment of IMU and beacon frames into unified records."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..core import (
    DEFAULT_SESSION_START,
    ActivityZoneMap,
    Timestamp,
    UnifiedRecord,
    format_wall_clock,
)
from ..errors import InvariantViolation, InvertedRange
from .frames import StreamFrame

DEFAULT_TOLERANCE_MS = 2000


@dataclass
class Counters:
    frames_received: int = 0
    imu_accepted: int = 0
    frames_dropped: int = 0
    frames_reordered: int = 0
    frames_invalid: int = 0
    parse_errors: int = 0
    beacon_conflicts: int = 0

    def as_dict(self) -> Dict[str, int]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SessionLog:
    """Finalised, time-sorted records of one session."""

    session_id: str
    session_start: str
    zone_ids: Tuple[str, ...]
    records: Tuple[UnifiedRecord, ...]
    counters: Counters = field(default_factory=Counters, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "zone_ids", tuple(self.zone_ids))
        millis = [r.t.millis for r in self.records]
        if any(a > b for a, b in zip(millis, millis[1:])):
            raise InvariantViolation("session log records are not time-sorted")
        object.__setattr__(self, "_millis", millis)

    def __len__(self) -> int:
        return len(self.records)


def _accept(frames: Iterable[StreamFrame], tolerance_ms: int, counters: Counters
            ) -> List[Tuple[int, str, int, StreamFrame]]:
    """Reorder buffer: per-source staleness check in arrival order.

    A frame more than ``tolerance_ms`` older than the newest frame already seen
    from the same source is dropped. Survivors are sorted by (t_ms, src,
    arrival index), which does not depend on how sources interleave.
    """
    newest: Dict[str, int] = {}
    kept = []
    for seq, f in enumerate(frames):
        counters.frames_received += 1
        last = newest.get(f.src)
        if last is not None and last - f.t_ms > tolerance_ms:
            counters.frames_dropped += 1
            continue
        if last is not None and f.t_ms < last:
            counters.frames_reordered += 1
        newest[f.src] = f.t_ms if last is None else max(last, f.t_ms)
        kept.append((f.t_ms, f.src, seq, f))
    kept.sort(key=lambda item: item[:3])
    return kept


def merge_streams(imu: Iterable[StreamFrame], beacons: Iterable[StreamFrame], zone_map: ActivityZoneMap,
                  tolerance_ms: int = DEFAULT_TOLERANCE_MS, session_id: str = "session",
                  session_start: datetime = DEFAULT_SESSION_START, parse_errors: int = 0) -> SessionLog:
    """One record per accepted IMU frame, with beacon state forward-filled.

    A zone counts as present from its latest report at or before the sample
    time. If several zones claim presence at once the earliest zone in map
    order wins and the conflict is counted. Malformed input only moves
    counters; it never aborts the session.
    """
    counters = Counters(parse_errors=parse_errors)
    frames = [*imu, *beacons]
    accepted = _accept(frames, tolerance_ms, counters)
    zone_ids = zone_map.ids
    state: Dict[str, bool] = {}
    current: Optional[str] = None
    in_conflict = False
    records: List[UnifiedRecord] = []

    def resolve() -> Optional[str]:
        nonlocal in_conflict
        present = [z for z in zone_ids if state.get(z)]
        # count conflict episodes, not every report inside one
        if len(present) > 1 and not in_conflict:
            counters.beacon_conflicts += 1
        in_conflict = len(present) > 1
        return present[0] if present else None

    # at equal t_ms beacons apply before the IMU sample (forward fill is "at or before")
    accepted.sort(key=lambda item: (item[0], item[3].kind != "beacon", item[1], item[2]))
    for i, (t_ms, _, _, f) in enumerate(accepted):
        if f.kind == "beacon":
            if f.zone not in zone_map:
                counters.frames_invalid += 1
            else:
                state[f.zone] = f.present
            # reports sharing a timestamp apply together
            nxt = accepted[i + 1] if i + 1 < len(accepted) else None
            if nxt is None or nxt[0] != t_ms or nxt[3].kind != "beacon":
                current = resolve()
            continue
        try:
            records.append(UnifiedRecord.build(Timestamp.at(t_ms, session_start), f.accel, f.gyro,
                                               zone_ids, current))
            counters.imu_accepted += 1
        except InvariantViolation:
            counters.frames_invalid += 1
    return SessionLog(session_id, format_wall_clock(session_start), zone_ids, tuple(records), counters)


def query_range(log: SessionLog, t0_ms: int, t1_ms: int) -> List[UnifiedRecord]:
    """Records with t0 <= t.millis < t1, in time order."""
    if t0_ms > t1_ms:
        raise InvertedRange(t0_ms, t1_ms)
    millis = log._millis
    lo = bisect.bisect_left(millis, t0_ms)
    hi = bisect.bisect_left(millis, t1_ms)
    return list(log.records[lo:hi])


def records_to_samples(records: Sequence[UnifiedRecord]):
    return [r.to_sample() for r in records]
