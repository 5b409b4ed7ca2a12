"""Sensor ingestion: wire frames, time alignment, session logs, table export, live server."""

from .frames import StreamFrame, format_frame, parse_frame, parse_lines, read_frames, write_frames
from .logfile import LogWriter, read_log, write_log
from .server import SessionConfig, send_lines, serve, serve_async
from .session import Counters, SessionLog, merge_streams, query_range
from .table import export_table, import_table, parse_table, render_plot_data, render_table

__all__ = [
    "Counters", "LogWriter", "SessionConfig", "SessionLog", "StreamFrame", "export_table",
    "format_frame", "import_table", "merge_streams", "parse_frame", "parse_lines", "parse_table",
    "query_range", "read_frames", "read_log", "render_plot_data", "render_table", "send_lines",
    "serve", "serve_async", "write_frames", "write_log",
]
