"""Domain types shared by every stage of the pipeline.

Units are fixed throughout: acceleration in g, angular rate in deg/s, time in
integer milliseconds since session start. Sensor axes follow a chest-mounted
convention: X lateral, Y vertical when standing, Z anterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Tuple

from .errors import (
    DuplicateZoneId,
    EmptyMap,
    InputError,
    InvariantViolation,
    OverlappingZones,
    UnknownZoneId,
)

Vec3 = Tuple[float, float, float]

ACCEL_FULL_SCALE_G = 16.0
DEFAULT_SESSION_START = datetime(2022, 1, 1, tzinfo=timezone.utc)
UNKNOWN = "UNKNOWN"


def format_wall_clock(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_wall_clock(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True, slots=True)
class Timestamp:
    """Session-relative milliseconds plus the matching UTC wall clock."""

    millis: int
    wall_clock: str

    def __post_init__(self) -> None:
        if self.millis < 0:
            raise InvariantViolation(f"negative timestamp {self.millis}")

    @classmethod
    def at(cls, millis: int, session_start: datetime = DEFAULT_SESSION_START) -> Timestamp:
        millis = int(millis)
        return cls(millis, format_wall_clock(session_start + timedelta(milliseconds=millis)))


@dataclass(frozen=True, slots=True)
class ImuSample:
    t: Timestamp
    accel: Vec3
    gyro: Vec3
    source_id: str = "imu"

    def __post_init__(self) -> None:
        values = (*self.accel, *self.gyro)
        if len(values) != 6 or not all(math.isfinite(v) for v in values):
            raise InvariantViolation(f"non-finite or malformed IMU sample at {self.t.millis} ms")
        if math.hypot(*self.accel) > ACCEL_FULL_SCALE_G:
            raise InvariantViolation(f"|accel| above {ACCEL_FULL_SCALE_G} g at {self.t.millis} ms")


@dataclass(frozen=True, slots=True)
class BeaconEvent:
    t: Timestamp
    zone_id: str
    present: bool
    source_id: str = "beacon"


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle in floor-plan meters, x0 < x1 and y0 < y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvariantViolation(f"degenerate rectangle {self}")

    def overlaps(self, other: Rect) -> bool:
        # shared edges are not overlap
        return (self.x0 < other.x1 and other.x0 < self.x1
                and self.y0 < other.y1 and other.y0 < self.y1)


@dataclass(frozen=True, slots=True)
class Zone:
    zone_id: str
    label: str
    rect: Rect


def validate_zone_map(zones: Sequence[Zone]) -> None:
    """Raise the first violated zone-map invariant, or return None."""
    if not zones:
        raise EmptyMap()
    seen = set()
    for z in zones:
        if z.zone_id in seen:
            raise DuplicateZoneId(z.zone_id)
        seen.add(z.zone_id)
    for i, a in enumerate(zones):
        for b in zones[i + 1:]:
            if a.rect.overlaps(b.rect):
                raise OverlappingZones(a.zone_id, b.zone_id)


@dataclass(frozen=True)
class ActivityZoneMap:
    zones: Tuple[Zone, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "zones", tuple(self.zones))
        validate_zone_map(self.zones)
        object.__setattr__(self, "_index", {z.zone_id: i for i, z in enumerate(self.zones)})

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(z.zone_id for z in self.zones)

    def __len__(self) -> int:
        return len(self.zones)

    def __contains__(self, zone_id: object) -> bool:
        return zone_id in self._index

    def index(self, zone_id: str) -> int:
        try:
            return self._index[zone_id]
        except KeyError:
            raise UnknownZoneId(zone_id) from None

    @classmethod
    def parse(cls, text: str) -> ActivityZoneMap:
        """Parse the tab-separated zone map format (``#`` lines are comments)."""
        zones = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise InputError(f"zone map line {lineno}: expected 6 tab-separated fields, got {len(parts)}")
            try:
                coords = [float(p) for p in parts[2:]]
            except ValueError as exc:
                raise InputError(f"zone map line {lineno}: {exc}") from None
            zones.append(Zone(parts[0], parts[1], Rect(*coords)))
        return cls(tuple(zones))

    @classmethod
    def load(cls, path: str | Path) -> ActivityZoneMap:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        lines = ["# zone_id\tlabel\tx0\ty0\tx1\ty1"]
        for z in self.zones:
            r = z.rect
            lines.append(f"{z.zone_id}\t{z.label}\t{r.x0:g}\t{r.y0:g}\t{r.x1:g}\t{r.y1:g}")
        return "\n".join(lines) + "\n"


def default_zone_map() -> ActivityZoneMap:
    """Four side-by-side 4 m x 4 m rooms: bedroom, kitchen, office, toilet."""
    names = [("bedroom", "Bedroom"), ("kitchen", "Kitchen"), ("office", "Office"), ("toilet", "Toilet")]
    return ActivityZoneMap(tuple(
        Zone(zid, label, Rect(4.0 * i, 0.0, 4.0 * (i + 1), 4.0)) for i, (zid, label) in enumerate(names)
    ))


class BehaviorLabel(str, Enum):
    STANDING = "Standing"
    WALKING = "Walking"
    STOPPING = "Stopping"
    SITTING = "Sitting"
    LYING_DOWN = "LyingDown"
    GETTING_UP = "GettingUp"
    FALL_FORWARD = "FallForward"
    FALL_SIDEWAYS = "FallSideways"

    @property
    def is_fall(self) -> bool:
        return self in (BehaviorLabel.FALL_FORWARD, BehaviorLabel.FALL_SIDEWAYS)

    @classmethod
    def parse(cls, text: str) -> BehaviorLabel:
        try:
            return cls(text)
        except ValueError:
            raise InputError(f"unknown behavior {text!r}") from None


@dataclass(frozen=True, slots=True)
class UnifiedRecord:
    """One merged row: timing, 6-axis IMU values, and per-zone presence.

    At most one zone is present; all-absent is the Unknown state.
    """

    wall_clock: str
    t: Timestamp
    elapsed_s: float
    accel: Vec3
    gyro: Vec3
    zone_presence: Mapping[str, bool]
    label: Optional[BehaviorLabel] = None

    def __post_init__(self) -> None:
        if sum(1 for v in self.zone_presence.values() if v) > 1:
            raise InvariantViolation(f"record at {self.t.millis} ms has more than one zone present")
        if abs(self.elapsed_s - self.t.millis / 1000.0) >= 1e-6:
            raise InvariantViolation(f"elapsed_s inconsistent with t at {self.t.millis} ms")

    @property
    def zone(self) -> Optional[str]:
        for zid, present in self.zone_presence.items():
            if present:
                return zid
        return None

    def to_sample(self) -> ImuSample:
        return ImuSample(self.t, self.accel, self.gyro)

    @classmethod
    def build(cls, t: Timestamp, accel: Vec3, gyro: Vec3, zone_ids: Iterable[str],
              zone: Optional[str], label: Optional[BehaviorLabel] = None) -> UnifiedRecord:
        presence = {zid: zid == zone for zid in zone_ids}
        return cls(t.wall_clock, t, t.millis / 1000.0, tuple(accel), tuple(gyro), presence, label)


def check_sorted(millis: Sequence[int]) -> bool:
    return all(a <= b for a, b in zip(millis, millis[1:]))
