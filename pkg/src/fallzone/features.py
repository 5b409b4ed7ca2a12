"""Pose and motion features from windowed IMU streams.

Orientation of a sample is given by the direction-cosine angles of its
acceleration vector: theta_i = arccos(a_i / |a|), in degrees. For a chest
sensor at rest the gravity vector dominates, so the angles encode posture;
abrupt per-sample jumps in these angles mark falls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import timedelta
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .core import ImuSample, Timestamp, parse_wall_clock
from .errors import AllDegenerate, DegenerateVector, InputError, UnsortedStream

DEGENERATE_G = 0.05
MIN_WINDOW_SAMPLES = 4
DEFAULT_WINDOW_S = 2.0
DEFAULT_STRIDE_S = 1.0

FEATURE_NAMES: Tuple[str, ...] = (
    *(f"accel_{s}_{ax}" for s in ("mean", "std", "min", "max") for ax in "xyz"),
    *(f"gyro_{s}_{ax}" for s in ("mean", "std") for ax in "xyz"),
    "mag_mean", "mag_max",
    "angle_mean_x", "angle_mean_y", "angle_mean_z",
    "rapid_change",
)
FEATURE_DIM = len(FEATURE_NAMES)
IDX_MAG_MAX = FEATURE_NAMES.index("mag_max")
IDX_RAPID_CHANGE = FEATURE_NAMES.index("rapid_change")


class OrientationAngles(NamedTuple):
    theta_x: float
    theta_y: float
    theta_z: float


@dataclass(frozen=True)
class Window:
    samples: Tuple[ImuSample, ...]
    start: Timestamp
    duration_s: float

    @property
    def end_millis(self) -> int:
        return self.start.millis + int(round(self.duration_s * 1000))


def magnitude(sample: ImuSample) -> float:
    ax, ay, az = sample.accel
    return math.sqrt(ax * ax + ay * ay + az * az)


def orientation_angles(sample: ImuSample) -> OrientationAngles:
    mag = magnitude(sample)
    if mag <= DEGENERATE_G:
        raise DegenerateVector(f"|a| = {mag:.4f} g at {sample.t.millis} ms")
    return OrientationAngles(*(math.degrees(math.acos(max(-1.0, min(1.0, a / mag)))) for a in sample.accel))


def angles_array(accel: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised orientation angles for an (n, 3) array.

    Returns (angles of the non-degenerate rows, boolean mask of those rows).
    """
    mag = np.sqrt(np.sum(accel * accel, axis=1))
    ok = mag > DEGENERATE_G
    cosines = np.clip(accel[ok] / mag[ok, None], -1.0, 1.0)
    return np.degrees(np.arccos(cosines)), ok


def make_windows(stream: Sequence[ImuSample], window_s: float = DEFAULT_WINDOW_S,
                 stride_s: float = DEFAULT_STRIDE_S) -> List[Window]:
    """Half-open windows [k*stride, k*stride + window) on the session clock.

    Windows holding fewer than four samples are dropped.
    """
    if not (window_s >= stride_s > 0):
        raise InputError(f"need window_s >= stride_s > 0, got window={window_s} stride={stride_s}")
    if not stream:
        return []
    millis = np.fromiter((s.t.millis for s in stream), dtype=np.int64, count=len(stream))
    if np.any(np.diff(millis) < 0):
        raise UnsortedStream("IMU stream is not sorted by time")
    origin = parse_wall_clock(stream[0].t.wall_clock) - timedelta(milliseconds=stream[0].t.millis)
    return [Window(tuple(stream[i0:i1]), Timestamp.at(lo, origin), window_s)
            for lo, i0, i1 in window_spans(millis, window_s, stride_s)]


def window_spans(millis: np.ndarray, window_s: float, stride_s: float) -> List[Tuple[int, int, int]]:
    """(window start ms, first index, end index) for every retained window."""
    if len(millis) == 0:
        return []
    win_ms = int(round(window_s * 1000))
    stride_ms = int(round(stride_s * 1000))
    first, last = int(millis[0]), int(millis[-1])
    k = max(0, (first - win_ms) // stride_ms + 1)
    out = []
    while k * stride_ms <= last:
        lo = k * stride_ms
        i0 = int(np.searchsorted(millis, lo, side="left"))
        i1 = int(np.searchsorted(millis, lo + win_ms, side="left"))
        if i1 - i0 >= MIN_WINDOW_SAMPLES:
            out.append((lo, i0, i1))
        k += 1
    return out


def features_from_arrays(accel: np.ndarray, gyro: np.ndarray) -> np.ndarray:
    """Feature vector for one window given (n, 3) accel and gyro arrays."""
    angles, ok = angles_array(accel)
    if not ok.any():
        raise AllDegenerate("no sample in window has a usable acceleration vector")
    mag = np.sqrt(np.sum(accel * accel, axis=1))
    if len(angles) > 1:
        rapid = float(np.max(np.abs(np.diff(angles, axis=0))))
    else:
        rapid = 0.0
    return np.concatenate([
        accel.mean(axis=0), accel.std(axis=0), accel.min(axis=0), accel.max(axis=0),
        gyro.mean(axis=0), gyro.std(axis=0),
        [mag.mean(), mag.max()],
        angles.mean(axis=0),
        [rapid],
    ])


def window_features(w: Window) -> np.ndarray:
    accel = np.array([s.accel for s in w.samples], dtype=float)
    gyro = np.array([s.gyro for s in w.samples], dtype=float)
    return features_from_arrays(accel, gyro)
