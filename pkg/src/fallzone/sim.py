"""Deterministic ADL scenario simulator.

Body model: one IMU on the chest, axes X lateral, Y vertical when standing,
Z anterior. At rest the accelerometer reads the gravity reaction, so upright
postures read (0, 1, 0) g and lying on the back reads (0, 0, 1) g. Postures
move between rest vectors along great-circle (slerp) paths.

A fall topples the trunk with an accelerating profile (angle grows with the
square of elapsed fall time) while the measured magnitude dips, then ends in a
short impact spike. The impact reads along the bisector of the start and end
postures, so the orientation jumps at impact as well as spiking in magnitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import (
    DEFAULT_SESSION_START,
    ActivityZoneMap,
    BehaviorLabel,
    ImuSample,
    Timestamp,
)
from .errors import InputError, InvariantViolation, UnknownZoneId
from .features import features_from_arrays
from .gateway.frames import StreamFrame
from .learners._rng import make_rng

UPRIGHT = np.array([0.0, 1.0, 0.0])
LYING_BACK = np.array([0.0, 0.0, 1.0])
LYING_SIDE = np.array([1.0, 0.0, 0.0])

B = BehaviorLabel
UPRIGHT_BEHAVIORS = (B.STANDING, B.WALKING, B.STOPPING, B.SITTING)


@dataclass(frozen=True)
class Kinematics:
    """Tunable magnitudes of the body model."""

    fall_duration_s: float = 0.5
    impact_g: float = 2.5
    impact_samples: int = 2
    fall_dip: float = 0.6
    walk_freq_hz: float = 2.0
    walk_bob_g: float = 0.25
    walk_yaw_dps: float = 30.0
    lie_transition_s: float = 3.0
    getup_transition_s: float = 2.0
    sitting_gyro_scale: float = 0.3
    lying_gyro_scale: float = 0.2


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _slerp(a: np.ndarray, b: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Points on the great circle from unit vector a to b at fractions s."""
    omega = math.acos(max(-1.0, min(1.0, float(a @ b))))
    if omega < 1e-12:
        return np.tile(a, (len(s), 1))
    so = math.sin(omega)
    return (np.sin((1.0 - s) * omega)[:, None] * a + np.sin(s * omega)[:, None] * b) / so


def _rotation_gyro(a: np.ndarray, b: np.ndarray, rate_dps: np.ndarray) -> np.ndarray:
    axis = np.cross(a, b)
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        return np.zeros((len(rate_dps), 3))
    return rate_dps[:, None] * (axis / norm)


def _transition(a: np.ndarray, b: np.ndarray, n: int, rate: float) -> Tuple[np.ndarray, np.ndarray]:
    """Smooth (cosine-eased) posture change over n samples; returns accel, gyro."""
    if n <= 0:
        return np.empty((0, 3)), np.empty((0, 3))
    s = (np.arange(1, n + 1)) / n
    eased = (1.0 - np.cos(np.pi * s)) / 2.0
    omega_deg = math.degrees(math.acos(max(-1.0, min(1.0, float(a @ b)))))
    rate_dps = omega_deg * (np.pi / 2.0) * np.sin(np.pi * s) * rate / n
    return _slerp(a, b, eased), _rotation_gyro(a, b, rate_dps)


def segment_arrays(behavior: BehaviorLabel, duration_s: float, rate: float, noise_g: float,
                   noise_dps: float, rng: np.random.Generator, start: Optional[np.ndarray] = None,
                   kin: Kinematics = Kinematics()) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Generate one behavior segment as arrays.

    Returns (accel (n, 3) g, gyro (n, 3) deg/s, final rest posture, index of
    the first impact sample or -1).
    """
    n = int(round(duration_s * rate))
    t = np.arange(n) / rate
    accel = np.empty((n, 3))
    gyro = np.zeros((n, 3))
    gyro_scale = 1.0
    impact = -1

    if behavior in UPRIGHT_BEHAVIORS:
        start = UPRIGHT if start is None else start
        m = 0
        if not np.allclose(start, UPRIGHT):
            m = min(n, int(round(kin.getup_transition_s * rate)))
            accel[:m], gyro[:m] = _transition(start, UPRIGHT, m, rate)
        accel[m:] = UPRIGHT
        tt = t[m:]
        if behavior in (B.WALKING, B.STOPPING):
            amp = np.ones_like(tt)
            if behavior is B.STOPPING and len(tt):
                amp = 1.0 - (tt - tt[0]) / max(duration_s - tt[0], 1e-9)
            accel[m:, 1] += kin.walk_bob_g * amp * np.sin(2 * np.pi * kin.walk_freq_hz * tt)
            gyro[m:, 1] += kin.walk_yaw_dps * amp * np.sin(np.pi * kin.walk_freq_hz * tt)
        elif behavior is B.SITTING:
            gyro_scale = kin.sitting_gyro_scale
        end = UPRIGHT

    elif behavior is B.LYING_DOWN:
        start = UPRIGHT if start is None else start
        end = LYING_BACK
        m = 0 if np.allclose(start, end) else min(n, int(round(kin.lie_transition_s * rate)))
        accel[:m], gyro[:m] = _transition(start, end, m, rate)
        accel[m:] = end
        gyro_scale = kin.lying_gyro_scale

    elif behavior is B.GETTING_UP:
        start = LYING_BACK if start is None else start
        end = UPRIGHT
        m = 0 if np.allclose(start, end) else min(n, int(round(kin.getup_transition_s * rate)))
        accel[:m], gyro[:m] = _transition(start, end, m, rate)
        accel[m:] = end

    else:  # falls
        start = UPRIGHT if start is None else start
        end = LYING_BACK if behavior is B.FALL_FORWARD else LYING_SIDE
        m = min(n, max(kin.impact_samples + 1, int(round(kin.fall_duration_s * rate))))
        s = np.arange(1, m + 1) / m
        mag = 1.0 - kin.fall_dip * np.sin(np.pi * s)
        accel[:m] = _slerp(start, end, s * s) * mag[:, None]
        omega_deg = math.degrees(math.acos(max(-1.0, min(1.0, float(start @ end)))))
        gyro[:m] = _rotation_gyro(start, end, omega_deg * 2.0 * s * rate / m)
        impact = m - kin.impact_samples
        accel[impact:m] = kin.impact_g * _unit(start + end)
        accel[m:] = end
        gyro_scale = kin.lying_gyro_scale

    if noise_g > 0:
        accel += rng.normal(0.0, noise_g, size=accel.shape)
    if noise_dps > 0:
        gyro += rng.normal(0.0, noise_dps * gyro_scale, size=gyro.shape)
    return accel, gyro, end, impact


def generate_segment(behavior: BehaviorLabel, duration_s: float, rate: float = 50.0,
                     noise_g: float = 0.03, noise_dps: float = 2.0,
                     rng: Optional[np.random.Generator] = None, start: Optional[np.ndarray] = None,
                     t0_ms: int = 0, kin: Kinematics = Kinematics(),
                     session_start: datetime = DEFAULT_SESSION_START) -> List[ImuSample]:
    rng = make_rng(0) if rng is None else rng
    accel, gyro, _, _ = segment_arrays(behavior, duration_s, rate, noise_g, noise_dps, rng, start, kin)
    return [
        ImuSample(Timestamp.at(t0_ms + int(round(i * 1000.0 / rate)), session_start),
                  tuple(a), tuple(g))
        for i, (a, g) in enumerate(zip(accel.tolist(), gyro.tolist()))
    ]


# -- scenarios ------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioStep:
    behavior: BehaviorLabel
    duration_s: float
    zone_id: str


@dataclass(frozen=True)
class Scenario:
    steps: Tuple[ScenarioStep, ...]
    sample_rate_hz: float = 50.0
    noise_sigma_g: float = 0.03
    noise_sigma_dps: float = 2.0
    seed: int = 7

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise InvariantViolation("scenario has no steps")
        if any(s.duration_s <= 0 for s in self.steps):
            raise InvariantViolation("scenario step durations must be > 0")
        if not 10 <= self.sample_rate_hz <= 200:
            raise InvariantViolation(f"sample rate {self.sample_rate_hz} Hz outside [10, 200]")

    @property
    def duration_s(self) -> float:
        return sum(s.duration_s for s in self.steps)

    @classmethod
    def parse(cls, text: str) -> Scenario:
        opts: Dict[str, float] = {}
        steps = []
        directives = {"@rate": "sample_rate_hz", "@noise_g": "noise_sigma_g",
                      "@noise_dps": "noise_sigma_dps", "@seed": "seed"}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("@"):
                key, _, val = line.partition(" ") if " " in line else line.partition("\t")
                if key not in directives:
                    raise InputError(f"scenario line {lineno}: unknown directive {key!r}")
                try:
                    opts[directives[key]] = int(val) if key == "@seed" else float(val)
                except ValueError:
                    raise InputError(f"scenario line {lineno}: bad value {val.strip()!r}") from None
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) != 3:
                raise InputError(f"scenario line {lineno}: expected behavior<TAB>duration_s<TAB>zone_id")
            try:
                steps.append(ScenarioStep(BehaviorLabel.parse(parts[0].strip()), float(parts[1]),
                                          parts[2].strip()))
            except ValueError as exc:
                raise InputError(f"scenario line {lineno}: {exc}") from None
        return cls(tuple(steps), **opts)

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        lines = [f"@rate {self.sample_rate_hz:g}", f"@noise_g {self.noise_sigma_g:g}",
                 f"@noise_dps {self.noise_sigma_dps:g}", f"@seed {self.seed}"]
        lines += [f"{s.behavior.value}\t{s.duration_s:g}\t{s.zone_id}" for s in self.steps]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FallInterval:
    start_ms: int
    end_ms: int
    impact_ms: int
    zone_id: str
    label: BehaviorLabel


@dataclass(frozen=True)
class TruthSegment:
    behavior: BehaviorLabel
    zone_id: str
    start_ms: int
    end_ms: int


@dataclass(frozen=True)
class GroundTruth:
    """Scripted labels; per-sample values are looked up from the segment list."""

    segments: Tuple[TruthSegment, ...]
    falls: Tuple[FallInterval, ...]
    sample_rate_hz: float

    @property
    def end_ms(self) -> int:
        return self.segments[-1].end_ms if self.segments else 0

    def _segment_at(self, t_ms: int) -> Optional[TruthSegment]:
        starts = [s.start_ms for s in self.segments]
        i = int(np.searchsorted(starts, t_ms, side="right")) - 1
        if i < 0 or t_ms >= self.segments[i].end_ms:
            return None
        return self.segments[i]

    def label_at(self, t_ms: int) -> Optional[BehaviorLabel]:
        seg = self._segment_at(t_ms)
        return seg.behavior if seg else None

    def zone_at(self, t_ms: int) -> Optional[str]:
        seg = self._segment_at(t_ms)
        return seg.zone_id if seg else None

    def zone_array(self, t_ms: np.ndarray) -> List[Optional[str]]:
        starts = np.array([s.start_ms for s in self.segments])
        idx = np.searchsorted(starts, t_ms, side="right") - 1
        return [self.segments[i].zone_id if 0 <= i and t < self.segments[i].end_ms else None
                for i, t in zip(idx.tolist(), np.asarray(t_ms).tolist())]

    def label_array(self, t_ms: np.ndarray) -> List[Optional[BehaviorLabel]]:
        starts = np.array([s.start_ms for s in self.segments])
        idx = np.searchsorted(starts, t_ms, side="right") - 1
        return [self.segments[i].behavior if 0 <= i and t < self.segments[i].end_ms else None
                for i, t in zip(idx.tolist(), np.asarray(t_ms).tolist())]

    def to_json(self) -> str:
        doc = {
            "sample_rate_hz": self.sample_rate_hz,
            "segments": [[s.behavior.value, s.zone_id, s.start_ms, s.end_ms] for s in self.segments],
            "falls": [[f.label.value, f.zone_id, f.start_ms, f.end_ms, f.impact_ms] for f in self.falls],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> GroundTruth:
        try:
            doc = json.loads(text)
            segs = tuple(TruthSegment(BehaviorLabel(b), z, int(s), int(e)) for b, z, s, e in doc["segments"])
            falls = tuple(FallInterval(int(s), int(e), int(i), z, BehaviorLabel(b))
                          for b, z, s, e, i in doc["falls"])
            return cls(segs, falls, float(doc["sample_rate_hz"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"malformed ground truth: {exc}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> GroundTruth:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class SimulatedSession:
    imu_frames: Tuple[StreamFrame, ...]
    beacon_frames: Tuple[StreamFrame, ...]
    truth: GroundTruth


def beacon_src(zone_id: str) -> str:
    return f"beacon-{zone_id}"


def simulate_session(scn: Scenario, zone_map: ActivityZoneMap, imu_src: str = "imu0",
                     kin: Kinematics = Kinematics(), heartbeat_ms: int = 1000) -> SimulatedSession:
    """Concatenate scenario segments into IMU frames, beacon frames and truth.

    Beacons report on every zone change (old zone absent, new zone present)
    and the current zone's beacon repeats "present" every ``heartbeat_ms``.
    """
    for step in scn.steps:
        if step.zone_id not in zone_map:
            raise UnknownZoneId(step.zone_id)
    rng = make_rng(scn.seed, 0x51)
    rate = scn.sample_rate_hz
    posture = UPRIGHT
    n_done = 0
    imu: List[StreamFrame] = []
    beacons: List[Tuple[int, int, StreamFrame]] = []
    segments: List[TruthSegment] = []
    falls: List[FallInterval] = []
    current_zone: Optional[str] = None

    def t_of(i: int) -> int:
        return int(round(i * 1000.0 / rate))

    def beacon(t: int, zone: str, present: bool) -> None:
        beacons.append((t, len(beacons), StreamFrame.beacon(beacon_src(zone), t, zone, present)))

    for step in scn.steps:
        accel, gyro, posture_end, impact = segment_arrays(
            step.behavior, step.duration_s, rate, scn.noise_sigma_g, scn.noise_sigma_dps, rng, posture, kin)
        n = len(accel)
        if n == 0:
            continue
        t0 = t_of(n_done)
        if step.zone_id != current_zone:
            if current_zone is None:
                for z in zone_map.ids:
                    if z != step.zone_id:
                        beacon(t0, z, False)
            else:
                beacon(t0, current_zone, False)
            beacon(t0, step.zone_id, True)
            current_zone = step.zone_id
        for i, (a, g) in enumerate(zip(accel.tolist(), gyro.tolist())):
            imu.append(StreamFrame(imu_src, t_of(n_done + i), "imu", tuple(a), tuple(g)))
        t_end = t_of(n_done + n)
        segments.append(TruthSegment(step.behavior, step.zone_id, t0, t_end))
        if step.behavior.is_fall:
            falls.append(FallInterval(t0, t_end, t_of(n_done + impact), step.zone_id, step.behavior))
        # heartbeats strictly inside this segment
        hb = (t0 // heartbeat_ms + 1) * heartbeat_ms
        while hb < t_end:
            beacon(hb, current_zone, True)
            hb += heartbeat_ms
        posture = posture_end
        n_done += n

    beacons.sort(key=lambda b: (b[0], b[1]))
    truth = GroundTruth(tuple(segments), tuple(falls), rate)
    return SimulatedSession(tuple(imu), tuple(b[2] for b in beacons), truth)


# -- scripted corpora -------------------------------------------------------

# Activity profile of the i-th zone in map order (cycled): which ADLs happen there.
ZONE_PROFILES = ("lying", "walking", "sitting", "standing")


def _visit_steps(profile: str, zone: str, rng: np.random.Generator) -> List[ScenarioStep]:
    dwell = lambda lo, hi: float(round(rng.uniform(lo, hi), 1))  # noqa: E731
    if profile == "lying":
        return [ScenarioStep(B.LYING_DOWN, dwell(15, 30), zone), ScenarioStep(B.GETTING_UP, 2.0, zone)]
    if profile == "walking":
        return [ScenarioStep(B.WALKING, dwell(5, 9), zone), ScenarioStep(B.STOPPING, dwell(3, 5), zone),
                ScenarioStep(B.WALKING, dwell(5, 9), zone), ScenarioStep(B.STOPPING, dwell(3, 5), zone)]
    if profile == "sitting":
        return [ScenarioStep(B.SITTING, dwell(15, 30), zone)]
    return [ScenarioStep(B.STANDING, dwell(15, 30), zone)]


def adl_tour(zone_map: ActivityZoneMap, duration_s: float = 180.0, seed: int = 7,
             fall_fraction: float = 0.1, transit_s: float = 3.0, sample_rate_hz: float = 50.0,
             noise_sigma_g: float = 0.03, noise_sigma_dps: float = 2.0) -> Scenario:
    """Random tour of the zones with zone-typical ADLs and scripted falls.

    Each visit starts with a short walk into the zone. Falls replace nothing;
    each inserts (fall, lying down, getting up) inside a visit so that
    ``fall_fraction`` of all segments are falls.
    """
    rng = make_rng(seed, 0x70)
    ids = zone_map.ids
    visits: List[List[ScenarioStep]] = []
    total = 0.0
    current = None
    while total < duration_s:
        choices = [z for z in ids if z != current] or list(ids)
        zone = choices[int(rng.integers(len(choices)))]
        profile = ZONE_PROFILES[ids.index(zone) % len(ZONE_PROFILES)]
        visit = [ScenarioStep(B.WALKING, transit_s, zone), *_visit_steps(profile, zone, rng)]
        visits.append(visit)
        total += sum(s.duration_s for s in visit)
        current = zone
    base = sum(len(v) for v in visits)
    n_falls = 0
    if fall_fraction > 0:
        n_falls = max(1, int(round(fall_fraction * base / (1.0 - 3.0 * fall_fraction))))
    n_falls = min(n_falls, len(visits))
    for vi in sorted(rng.choice(len(visits), size=n_falls, replace=False).tolist()):
        visit = visits[vi]
        zone = visit[0].zone_id
        kind = B.FALL_FORWARD if rng.random() < 0.5 else B.FALL_SIDEWAYS
        # after the walk-in, or after the first upright activity
        at = 1 if visit[1].behavior not in UPRIGHT_BEHAVIORS else 2
        visit[at:at] = [ScenarioStep(kind, 1.0, zone),
                        ScenarioStep(B.LYING_DOWN, float(round(rng.uniform(4, 8), 1)), zone),
                        ScenarioStep(B.GETTING_UP, 2.0, zone)]
    steps = tuple(s for v in visits for s in v)
    return Scenario(steps, sample_rate_hz, noise_sigma_g, noise_sigma_dps, int(rng.integers(2**62)))


def session_seeds(seed: int, n: int) -> List[int]:
    rng = make_rng(seed, 0x5E)
    return [int(s) for s in rng.integers(0, 2**62, size=n)]


def labeled_window_corpus(n_windows: int, fall_fraction: float = 0.1, seed: int = 7,
                          rate: float = 50.0, noise_g: float = 0.03, noise_dps: float = 2.0,
                          window_s: float = 2.0, kin: Kinematics = Kinematics()
                          ) -> Tuple[np.ndarray, List[BehaviorLabel]]:
    """Independent 2 s windows; fall windows hold an upright lead-in then the fall."""
    rng = make_rng(seed, 0xC0)
    n_fall = int(round(n_windows * fall_fraction))
    kinds = [True] * n_fall + [False] * (n_windows - n_fall)
    kinds = [kinds[i] for i in rng.permutation(n_windows)]
    others = [B.STANDING, B.WALKING, B.STOPPING, B.SITTING, B.LYING_DOWN, B.GETTING_UP]
    X, labels = [], []
    for is_fall in kinds:
        if is_fall:
            label = B.FALL_FORWARD if rng.random() < 0.5 else B.FALL_SIDEWAYS
            lead = float(round(rng.uniform(0.3, window_s - kin.fall_duration_s - 0.1), 2))
            pre = others[int(rng.integers(2))]
            a1, g1, p, _ = segment_arrays(pre, lead, rate, noise_g, noise_dps, rng, None, kin)
            a2, g2, _, _ = segment_arrays(label, window_s - lead, rate, noise_g, noise_dps, rng, p, kin)
            accel, gyro = np.vstack([a1, a2]), np.vstack([g1, g2])
        else:
            label = others[int(rng.integers(len(others)))]
            accel, gyro, _, _ = segment_arrays(label, window_s, rate, noise_g, noise_dps, rng, None, kin)
        X.append(features_from_arrays(accel, gyro))
        labels.append(label)
    return np.array(X), labels
