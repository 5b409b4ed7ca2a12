"""Live ingestion over TCP.

Each connection carries newline-framed wire frames. One reader task per
connection feeds a single queue; the session owner drains it and, when the
session closes, runs the same merge as offline ingestion over the frames in
arrival order. Staleness is judged per source and ties are ordered by source
id, so the result does not depend on how connections interleave.
"""

from __future__ import annotations

import asyncio
import logging
import socket
import time
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, List, Optional, Tuple

from ..core import DEFAULT_SESSION_START, ActivityZoneMap
from ..errors import BindFailure, FrameParse, InvariantViolation, UnknownKind
from .frames import MAX_LINE_BYTES, StreamFrame, parse_frame
from .session import DEFAULT_TOLERANCE_MS, SessionLog, merge_streams

log = logging.getLogger(__name__)


@dataclass
class SessionConfig:
    zone_map: ActivityZoneMap
    tolerance_ms: int = DEFAULT_TOLERANCE_MS
    session_id: str = "live"
    session_start: datetime = DEFAULT_SESSION_START
    # close once this many connections have come and gone
    expected_connections: Optional[int] = None
    # close after this long with no open connection and no traffic
    idle_timeout_s: Optional[float] = None


def parse_endpoint(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


class _Session:
    def __init__(self, cfg: SessionConfig) -> None:
        self.cfg = cfg
        self.queue: asyncio.Queue = asyncio.Queue()
        self.frames: List[StreamFrame] = []
        self.parse_errors = 0
        self.opened = 0
        self.closed = 0
        self.last_activity = time.monotonic()
        self.done = asyncio.Event()

    def _check_done(self) -> None:
        n = self.cfg.expected_connections
        if n is not None and self.closed >= n and self.opened == self.closed:
            self.done.set()

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self.opened += 1
        buf = b""
        overflow = False
        try:
            while True:
                chunk = await reader.read(65536)
                if not chunk:
                    break
                self.last_activity = time.monotonic()
                buf += chunk
                *lines, buf = buf.split(b"\n")
                for line in lines:
                    if overflow:
                        # tail of an over-long line
                        overflow = False
                        continue
                    await self.queue.put(line)
                if len(buf) > MAX_LINE_BYTES:
                    await self.queue.put(b"x" * (MAX_LINE_BYTES + 1))
                    buf = b""
                    overflow = True
            if buf.strip() and not overflow:
                await self.queue.put(buf)
        except (ConnectionError, asyncio.IncompleteReadError):
            log.info("connection dropped mid-stream")
        finally:
            writer.close()
            await self.queue.join()
            self.closed += 1
            self._check_done()

    async def consume(self) -> None:
        while True:
            line = await self.queue.get()
            try:
                if line.strip():
                    self.frames.append(parse_frame(line))
            except (FrameParse, UnknownKind, InvariantViolation):
                self.parse_errors += 1
            finally:
                self.queue.task_done()

    async def idle_watch(self) -> None:
        timeout = self.cfg.idle_timeout_s
        while timeout is not None:
            await asyncio.sleep(min(timeout, 0.05))
            if self.opened == self.closed and time.monotonic() - self.last_activity >= timeout:
                self.done.set()
                return


async def serve_async(host: str, port: int, cfg: SessionConfig,
                      ready: Optional[Callable[[int], None]] = None) -> SessionLog:
    session = _Session(cfg)
    try:
        server = await asyncio.start_server(session.handle, host, port, family=socket.AF_INET)
    except OSError as exc:
        raise BindFailure(f"cannot listen on {host}:{port}: {exc}") from exc
    bound = server.sockets[0].getsockname()[1]
    log.info("listening on %s:%d", host, bound)
    consumer = asyncio.create_task(session.consume())
    watcher = asyncio.create_task(session.idle_watch())
    if ready is not None:
        ready(bound)
    try:
        await session.done.wait()
    finally:
        server.close()
        await server.wait_closed()
        await session.queue.join()
        consumer.cancel()
        watcher.cancel()
    return merge_streams(session.frames, [], cfg.zone_map, cfg.tolerance_ms, cfg.session_id,
                         cfg.session_start, parse_errors=session.parse_errors)


def serve(listen: str, cfg: SessionConfig, ready: Optional[Callable[[int], None]] = None) -> SessionLog:
    """Run a live session on ``host:port`` until it closes; returns the merged log."""
    host, port = parse_endpoint(listen)
    return asyncio.run(serve_async(host, port, cfg, ready))


def send_lines(endpoint: str, lines, timeout: float = 10.0) -> int:
    """Client helper: stream raw lines to a running server."""
    host, port = parse_endpoint(endpoint)
    n = 0
    with socket.create_connection((host, port), timeout=timeout) as sock:
        for line in lines:
            if isinstance(line, str):
                line = line.encode("utf-8")
            if not line.endswith(b"\n"):
                line += b"\n"
            sock.sendall(line)
            n += 1
    return n
