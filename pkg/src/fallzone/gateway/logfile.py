"""Append-only binary session log.

Layout: magic line, length-prefixed JSON header (session id, start, zone
ids), then fixed-size record entries tagged ``R``, closed by one ``F``
entry carrying the counters as length-prefixed JSON. Records are written once
and never rewritten.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import BinaryIO, List, Optional

from ..core import BehaviorLabel, Timestamp, UnifiedRecord, parse_wall_clock
from ..errors import InputError
from .session import Counters, SessionLog

MAGIC = b"FZLOG1\n"
_REC = struct.Struct("<q6dhh")
_LEN = struct.Struct("<I")
_LABELS = list(BehaviorLabel)


class LogWriter:
    def __init__(self, path: str | Path, session_id: str, session_start: str, zone_ids) -> None:
        self.zone_ids = tuple(zone_ids)
        self._zone_index = {z: i for i, z in enumerate(self.zone_ids)}
        self._fh: Optional[BinaryIO] = open(path, "wb")
        self._last = -1
        head = json.dumps({"session_id": session_id, "session_start": session_start,
                           "zone_ids": list(self.zone_ids)}, sort_keys=True).encode("utf-8")
        self._fh.write(MAGIC + _LEN.pack(len(head)) + head)

    def append(self, r: UnifiedRecord) -> None:
        if self._fh is None:
            raise ValueError("log is closed")
        if r.t.millis < self._last:
            raise ValueError("records must be appended in time order")
        self._last = r.t.millis
        zone = r.zone
        z = -1 if zone is None else self._zone_index[zone]
        lab = -1 if r.label is None else _LABELS.index(r.label)
        self._fh.write(b"R" + _REC.pack(r.t.millis, *r.accel, *r.gyro, z, lab))

    def close(self, counters: Counters) -> None:
        if self._fh is None:
            return
        foot = json.dumps(counters.as_dict(), sort_keys=True).encode("utf-8")
        self._fh.write(b"F" + _LEN.pack(len(foot)) + foot)
        self._fh.close()
        self._fh = None


def write_log(log: SessionLog, path: str | Path) -> None:
    w = LogWriter(path, log.session_id, log.session_start, log.zone_ids)
    for r in log.records:
        w.append(r)
    w.close(log.counters)


def read_log(path: str | Path) -> SessionLog:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise InputError(f"{path}: not a session log")
    pos = len(MAGIC)
    try:
        (n,) = _LEN.unpack_from(data, pos)
        head = json.loads(data[pos + 4:pos + 4 + n])
        pos += 4 + n
        zone_ids = tuple(head["zone_ids"])
        start = parse_wall_clock(head["session_start"])
        records: List[UnifiedRecord] = []
        counters = Counters()
        while pos < len(data):
            tag = data[pos:pos + 1]
            pos += 1
            if tag == b"R":
                t_ms, ax, ay, az, gx, gy, gz, z, lab = _REC.unpack_from(data, pos)
                pos += _REC.size
                records.append(UnifiedRecord.build(
                    Timestamp.at(t_ms, start), (ax, ay, az), (gx, gy, gz), zone_ids,
                    None if z < 0 else zone_ids[z], None if lab < 0 else _LABELS[lab]))
            elif tag == b"F":
                (n,) = _LEN.unpack_from(data, pos)
                counters = Counters(**json.loads(data[pos + 4:pos + 4 + n]))
                pos += 4 + n
            else:
                raise InputError(f"{path}: corrupt entry at byte {pos - 1}")
    except (struct.error, KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: corrupt session log ({exc})") from None
    return SessionLog(head["session_id"], head["session_start"], zone_ids, tuple(records), counters)
