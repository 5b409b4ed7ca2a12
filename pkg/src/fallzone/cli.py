"""Command-line entry point.

Subcommands chain through files:

    simulate -> ingest -> detect -> eval
                   \\-> export / plot-data
    ingest (several sessions) -> train-fall / train-zone -> model files

Exit codes: 0 success, 1 usage error, 2 input or parse error, 3 invariant
violation. Errors print a single diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .core import UNKNOWN, ActivityZoneMap, Timestamp, default_zone_map
from .errors import FallzoneError, InputError, InvariantViolation
from .fall_detector import FallConfig, FallEvent, FallModel, train_fall_model
from .features import DEFAULT_STRIDE_S, DEFAULT_WINDOW_S, window_spans
from .gateway import (
    SessionConfig,
    export_table,
    format_frame,
    merge_streams,
    read_frames,
    read_log,
    render_plot_data,
    send_lines,
    serve,
    write_frames,
    write_log,
)
from .pipeline import detect_session, evaluate, log_windows, training_windows
from .sim import GroundTruth, Scenario, adl_tour, simulate_session
from .zone_localizer import ZoneConfig, ZoneModel, ZoneTimeline, train_zone_model

DEFAULT_SEED = 7


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _zone_map(args) -> ActivityZoneMap:
    return ActivityZoneMap.load(args.zone_map) if args.zone_map else default_zone_map()


def _write_text(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    zm = _zone_map(args)
    if args.scenario:
        scn = Scenario.load(args.scenario)
        if args.seed is not None:
            scn = Scenario(scn.steps, scn.sample_rate_hz, scn.noise_sigma_g, scn.noise_sigma_dps, args.seed)
        seed = scn.seed
    else:
        seed = DEFAULT_SEED if args.seed is None else args.seed
        scn = adl_tour(zm, args.duration_s, seed, args.fall_fraction)
    sess = simulate_session(scn, zm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_frames(sess.imu_frames, out / "imu.frames")
    write_frames(sess.beacon_frames, out / "beacon.frames")
    sess.truth.save(out / "truth.json")
    (out / "scenario.txt").write_text(scn.dumps(), encoding="utf-8")
    print(f"seed={seed} scenario_seed={scn.seed}")
    print(f"imu_frames={len(sess.imu_frames)} beacon_frames={len(sess.beacon_frames)} "
          f"falls={len(sess.truth.falls)} duration_s={scn.duration_s:g}")
    return 0


def cmd_ingest(args) -> int:
    zm = _zone_map(args)
    frames, errors = [], 0
    for path in args.frames:
        f, e = read_frames(path)
        frames += f
        errors += e
    lg = merge_streams(frames, [], zm, args.tolerance_ms, args.session_id, parse_errors=errors)
    write_log(lg, args.out)
    print(" ".join(f"{k}={v}" for k, v in lg.counters.as_dict().items()))
    return 0


def cmd_serve(args) -> int:
    cfg = SessionConfig(_zone_map(args), args.tolerance_ms, args.session_id,
                        expected_connections=args.connections, idle_timeout_s=args.idle_timeout_s)
    if cfg.expected_connections is None and cfg.idle_timeout_s is None:
        cfg.idle_timeout_s = 5.0

    def ready(port: int) -> None:
        host = args.listen.rpartition(":")[0] or "127.0.0.1"
        print(f"listening on {host}:{port}", flush=True)

    lg = serve(args.listen, cfg, ready)
    write_log(lg, args.out)
    print(" ".join(f"{k}={v}" for k, v in lg.counters.as_dict().items()))
    return 0


def cmd_replay(args) -> int:
    n = 0
    for path in args.frames:
        frames, _ = read_frames(path)
        n += send_lines(args.connect, (format_frame(f) for f in frames))
    print(f"sent={n}")
    return 0


def cmd_export(args) -> int:
    n = export_table(read_log(args.log), args.out)
    print(f"rows={n}")
    return 0


def cmd_plot_data(args) -> int:
    _write_text(render_plot_data(read_log(args.log)), args.out)
    return 0


def _pairs(args) -> List:
    logs = args.log or []
    truths = args.truth or []
    if len(logs) != len(truths):
        raise UsageError("train-fall needs one --truth per --log")
    return [(read_log(lg), GroundTruth.load(tr)) for lg, tr in zip(logs, truths)]


def cmd_train_fall(args) -> int:
    zm = _zone_map(args)
    pairs = _pairs(args)
    X, labels, _ = training_windows([p[0] for p in pairs], [p[1] for p in pairs], zm, args.window_s, args.stride_s)
    model = train_fall_model(X, labels, FallConfig(k=args.k, rounds=args.rounds, folds=args.folds, seed=args.seed))
    Path(args.out).write_bytes(model.to_bytes())
    print(f"seed={args.seed}")
    print(f"windows={len(X)} falls={int(sum(lab.is_fall for lab in labels))} rounds={len(model.ensemble.alphas)}")
    print("cross-validated confusion matrix:")
    print(model.cv.format(["NonFall", "Fall"]))
    return 0


def cmd_train_zone(args) -> int:
    zm = _zone_map(args)
    Xs, zones = [], []
    for path in args.log:
        w = log_windows(read_log(path), args.window_s, args.stride_s)
        keep = [i for i, z in enumerate(w.beacon_zone) if z is not None]
        Xs.append(w.X[keep])
        zones += [w.beacon_zone[i] for i in keep]
    X = np.vstack(Xs)
    cfg = ZoneConfig(n_trees=args.trees, max_depth=args.depth, folds=args.folds, seed=args.seed)
    model = train_zone_model(X, zones, zm, cfg)
    Path(args.out).write_bytes(model.to_bytes())
    print(f"seed={args.seed}")
    print(f"windows={len(X)} trees={args.trees} depth={args.depth}")
    print("cross-validated confusion matrix:")
    print(model.cv.format(list(zm.ids)))
    return 0


def cmd_detect(args) -> int:
    lg = read_log(args.log)
    fm = FallModel.from_bytes(Path(args.fall_model).read_bytes()) if args.fall_model else None
    zmod = ZoneModel.from_bytes(Path(args.zone_model).read_bytes()) if args.zone_model else None
    det = detect_session(lg, fm, zmod, args.window_s, args.stride_s, use_beacons=not args.no_beacons)
    _write_text("".join(line + "\n" for line in det.lines()), args.out)
    return 0


def parse_event_lines(lines: Sequence[str]):
    """FALL/ZONE lines back into events and a zone timeline."""
    events, changes = [], []
    for n, line in enumerate(lines, 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "FALL" and len(parts) == 5:
                zone = None if parts[3] == UNKNOWN else parts[3]
                events.append(FallEvent(Timestamp.at(int(parts[1])), Timestamp.at(int(parts[2])),
                                        float(parts[4]), zone, float("nan"), float("nan")))
            elif parts[0] == "ZONE" and len(parts) == 3:
                changes.append((int(parts[1]), None if parts[2] == UNKNOWN else parts[2]))
            else:
                raise ValueError(parts[0])
        except ValueError as exc:
            raise InputError(f"event line {n}: cannot parse {line.strip()!r}") from exc
    return events, ZoneTimeline(tuple(changes))


def cmd_eval(args) -> int:
    zm = _zone_map(args)
    truth = GroundTruth.load(args.truth)
    events, timeline = parse_event_lines(Path(args.events).read_text(encoding="utf-8").splitlines())
    if args.log:
        starts = log_windows(read_log(args.log), args.window_s, args.stride_s).start_ms
    else:
        period = 1000.0 / truth.sample_rate_hz
        millis = np.arange(0, truth.end_ms, period).round().astype(np.int64)
        starts = np.array([lo for lo, _, _ in window_spans(millis, args.window_s, args.stride_s)], dtype=np.int64)
    zones = [timeline.zone_at(int(t)) for t in starts]
    metrics = evaluate(events, starts, zones, truth, zm.ids, args.window_s)
    _write_text(metrics.report(), args.out)
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fallzone", description="Fall detection and activity-zone localization pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, zone_map=True, windows=False):
        if zone_map:
            sp.add_argument("--zone-map", help="zone map file (default: built-in 4-zone home)")
        if windows:
            sp.add_argument("--window-s", type=float, default=DEFAULT_WINDOW_S)
            sp.add_argument("--stride-s", type=float, default=DEFAULT_STRIDE_S)

    sp = sub.add_parser("simulate", help="scenario -> frame files + ground truth")
    common(sp)
    sp.add_argument("--scenario", help="scenario file; a random ADL tour when omitted")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--duration-s", type=float, default=180.0)
    sp.add_argument("--fall-fraction", type=float, default=0.1)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ingest", help="frame files -> session log")
    common(sp)
    sp.add_argument("frames", nargs="+")
    sp.add_argument("--tolerance-ms", type=int, default=2000)
    sp.add_argument("--session-id", default="session")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("serve", help="live TCP gateway -> session log")
    common(sp)
    sp.add_argument("--listen", required=True, help="host:port (port 0 picks a free port)")
    sp.add_argument("--tolerance-ms", type=int, default=2000)
    sp.add_argument("--session-id", default="live")
    sp.add_argument("--connections", type=int, default=None, help="close after this many connections end")
    sp.add_argument("--idle-timeout-s", type=float, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("replay", help="stream frame files to a running gateway")
    sp.add_argument("frames", nargs="+")
    sp.add_argument("--connect", required=True, help="host:port")
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("export", help="session log -> CSV table")
    sp.add_argument("log")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("plot-data", help="session log -> per-axis time series")
    sp.add_argument("log")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plot_data)

    sp = sub.add_parser("train-fall", help="logs + ground truth -> fall model")
    common(sp, windows=True)
    sp.add_argument("--log", action="append", required=True)
    sp.add_argument("--truth", action="append", required=True)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--rounds", type=int, default=10)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train_fall)

    sp = sub.add_parser("train-zone", help="logs (beacon-labelled) -> zone model")
    common(sp, windows=True)
    sp.add_argument("--log", action="append", required=True)
    sp.add_argument("--trees", type=int, default=100)
    sp.add_argument("--depth", type=int, default=12)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train_zone)

    sp = sub.add_parser("detect", help="session log + models -> FALL/ZONE lines")
    common(sp, zone_map=False, windows=True)
    sp.add_argument("log")
    sp.add_argument("--fall-model")
    sp.add_argument("--zone-model")
    sp.add_argument("--no-beacons", action="store_true", help="ignore beacon presence; zones from the model only")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("eval", help="detections vs ground truth -> metrics report")
    common(sp, windows=True)
    sp.add_argument("events")
    sp.add_argument("--truth", required=True)
    sp.add_argument("--log", help="session log whose windows are scored (default: grid over the truth span)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except FallzoneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
