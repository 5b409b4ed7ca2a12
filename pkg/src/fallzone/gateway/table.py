"""Comma-separated table export of a session log (and its inverse)."""

from __future__ import annotations

import csv
import io
from datetime import timedelta
from pathlib import Path
from typing import List, Optional

from ..core import BehaviorLabel, Timestamp, UnifiedRecord, format_wall_clock, parse_wall_clock
from ..errors import InputError, InvariantViolation, IoFailure
from .session import Counters, SessionLog

BASE_COLUMNS = ("wall_clock", "t_ms", "elapsed_s",
                "accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z")


def header(zone_ids) -> List[str]:
    return [*BASE_COLUMNS, *zone_ids, "label"]


def _f6(x: float) -> str:
    return f"{x:.6f}"


def render_table(log: SessionLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header(log.zone_ids))
    for r in log.records:
        w.writerow([
            r.wall_clock, r.t.millis, _f6(r.elapsed_s),
            *(_f6(v) for v in r.accel), *(_f6(v) for v in r.gyro),
            *("1" if r.zone_presence.get(z) else "0" for z in log.zone_ids),
            r.label.value if r.label is not None else "",
        ])
    return buf.getvalue()


def export_table(log: SessionLog, path: str | Path) -> int:
    """Write the table; returns the number of data rows."""
    try:
        Path(path).write_text(render_table(log), encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return len(log.records)


def parse_table(text: str, session_id: str = "imported") -> SessionLog:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputError("table is empty (no header)")
    head = rows[0]
    if tuple(head[:len(BASE_COLUMNS)]) != BASE_COLUMNS or head[-1] != "label":
        raise InputError("table header does not match the export schema")
    zone_ids = tuple(head[len(BASE_COLUMNS):-1])
    records = []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(head):
            raise InputError(f"table line {lineno}: expected {len(head)} columns, got {len(row)}")
        try:
            millis = int(row[1])
            vals = [float(v) for v in row[2:9]]
            flags = row[9:9 + len(zone_ids)]
            if any(f not in ("0", "1") for f in flags):
                raise ValueError("zone columns must be 0 or 1")
            label: Optional[BehaviorLabel] = BehaviorLabel(row[-1]) if row[-1] else None
            records.append(UnifiedRecord(
                row[0], Timestamp(millis, row[0]), vals[0], tuple(vals[1:4]), tuple(vals[4:7]),
                {z: f == "1" for z, f in zip(zone_ids, flags)}, label,
            ))
        except (ValueError, InvariantViolation) as exc:
            raise InputError(f"table line {lineno}: {exc}") from None
    start = ""
    if records:
        first = records[0]
        start = format_wall_clock(parse_wall_clock(first.wall_clock) - timedelta(milliseconds=first.t.millis))
    return SessionLog(session_id, start, zone_ids, tuple(records), Counters())


def import_table(path: str | Path) -> SessionLog:
    p = Path(path)
    return parse_table(p.read_text(encoding="utf-8"), session_id=p.stem)


def render_plot_data(log: SessionLog) -> str:
    """Per-axis accel/gyro time series, one row per record."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_ms", "elapsed_s", "accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z", "zone"])
    for r in log.records:
        w.writerow([r.t.millis, _f6(r.elapsed_s), *(_f6(v) for v in r.accel), *(_f6(v) for v in r.gyro),
                    r.zone or "UNKNOWN"])
    return buf.getvalue()
