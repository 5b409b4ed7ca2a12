"""Newline-delimited JSON wire frames for IMU and beacon streams.

One frame per line, UTF-8, at most 4096 bytes::

    {"src":"imu0","t_ms":120,"kind":"imu","ax":0.01,"ay":0.99,"az":0.02,"gx":1.5,"gy":-0.3,"gz":0.1}
    {"src":"beacon-kitchen","t_ms":120,"kind":"beacon","zone":"kitchen","present":true}

Unknown keys are ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple

from ..core import Vec3
from ..errors import FrameParse, InvariantViolation, UnknownKind

MAX_LINE_BYTES = 4096
KINDS = ("imu", "beacon")
IMU_KEYS = ("ax", "ay", "az", "gx", "gy", "gz")


@dataclass(frozen=True, slots=True)
class StreamFrame:
    src: str
    t_ms: int
    kind: str
    accel: Optional[Vec3] = None
    gyro: Optional[Vec3] = None
    zone: Optional[str] = None
    present: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.t_ms < 0:
            raise InvariantViolation(f"negative t_ms {self.t_ms}")
        if self.kind == "imu":
            ok = self.accel is not None and self.gyro is not None and self.zone is None
        elif self.kind == "beacon":
            ok = self.zone is not None and self.present is not None and self.accel is None
        else:
            raise UnknownKind(self.kind)
        if not ok:
            raise InvariantViolation(f"{self.kind} frame payload inconsistent")

    @classmethod
    def imu(cls, src: str, t_ms: int, accel: Vec3, gyro: Vec3) -> StreamFrame:
        return cls(src, int(t_ms), "imu", tuple(float(a) for a in accel), tuple(float(g) for g in gyro))

    @classmethod
    def beacon(cls, src: str, t_ms: int, zone: str, present: bool) -> StreamFrame:
        return cls(src, int(t_ms), "beacon", zone=zone, present=bool(present))


def format_frame(frame: StreamFrame) -> str:
    """Serialise one frame as a wire line (with trailing newline)."""
    doc = {"src": frame.src, "t_ms": frame.t_ms, "kind": frame.kind}
    if frame.kind == "imu":
        doc.update(zip(IMU_KEYS, (*frame.accel, *frame.gyro)))
    else:
        doc["zone"] = frame.zone
        doc["present"] = frame.present
    return json.dumps(doc, separators=(",", ":")) + "\n"


def _field_pos(line: str, key: str) -> int:
    pos = line.find(f'"{key}"')
    return max(pos, 0)


def _number(doc: dict, key: str, line: str) -> float:
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FrameParse(_field_pos(line, key), f"field {key!r} must be a number")
    if not math.isfinite(v):
        raise FrameParse(_field_pos(line, key), f"field {key!r} is not finite")
    return float(v)


def parse_frame(line: str | bytes) -> StreamFrame:
    """Parse one wire line; raises FrameParse or UnknownKind."""
    if isinstance(line, bytes):
        if len(line.rstrip(b"\r\n")) > MAX_LINE_BYTES:
            raise FrameParse(MAX_LINE_BYTES, "line exceeds 4096 bytes")
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FrameParse(exc.start, "invalid UTF-8") from None
    line = line.rstrip("\r\n")
    if len(line.encode("utf-8")) > MAX_LINE_BYTES:
        raise FrameParse(MAX_LINE_BYTES, "line exceeds 4096 bytes")
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FrameParse(exc.pos, exc.msg) from None
    if not isinstance(doc, dict):
        raise FrameParse(0, "frame is not an object")
    src = doc.get("src")
    if not isinstance(src, str):
        raise FrameParse(_field_pos(line, "src"), "field 'src' must be a string")
    t_ms = doc.get("t_ms")
    if isinstance(t_ms, bool) or not isinstance(t_ms, int) or t_ms < 0:
        raise FrameParse(_field_pos(line, "t_ms"), "field 't_ms' must be a non-negative integer")
    if "kind" not in doc:
        raise FrameParse(len(line), "missing field 'kind'")
    kind = doc["kind"]
    if kind not in KINDS:
        raise UnknownKind(kind)
    if kind == "imu":
        ax, ay, az, gx, gy, gz = (_number(doc, k, line) for k in IMU_KEYS)
        return StreamFrame(src, t_ms, "imu", (ax, ay, az), (gx, gy, gz))
    zone = doc.get("zone")
    if not isinstance(zone, str):
        raise FrameParse(_field_pos(line, "zone"), "field 'zone' must be a string")
    present = doc.get("present")
    if not isinstance(present, bool):
        raise FrameParse(_field_pos(line, "present"), "field 'present' must be true or false")
    return StreamFrame(src, t_ms, "beacon", zone=zone, present=present)


def parse_lines(lines: Iterable[str | bytes]) -> Tuple[List[StreamFrame], int]:
    """Parse every non-blank line; returns (frames, number of unparseable lines)."""
    frames: List[StreamFrame] = []
    errors = 0
    for line in lines:
        if not line.strip():
            continue
        try:
            frames.append(parse_frame(line))
        except (FrameParse, UnknownKind, InvariantViolation):
            errors += 1
    return frames, errors


def read_frames(path: str | Path) -> Tuple[List[StreamFrame], int]:
    with open(path, "rb") as fh:
        return parse_lines(fh)


def write_frames(frames: Iterable[StreamFrame], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in frames:
            fh.write(format_frame(f))
            n += 1
    return n


def iter_lines(frames: Iterable[StreamFrame]) -> Iterator[bytes]:
    for f in frames:
        yield format_frame(f).encode("utf-8")
