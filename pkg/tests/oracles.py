"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the package under test; everything is plain Python.
"""

from __future__ import annotations

import math
from collections import Counter


def direction_angles(a):
    """Direction-cosine angles (degrees) by the textbook formula, one axis at a time."""
    norm = math.sqrt(sum(c * c for c in a))
    return tuple(math.degrees(math.acos(max(-1.0, min(1.0, c / norm)))) for c in a)


def knn_label(X, y, k, query):
    """Sort rows by (squared distance, insertion index); lowest class wins vote ties."""
    dist = [(sum((q - x) ** 2 for q, x in zip(query, row)), i) for i, row in enumerate(X)]
    dist.sort()
    votes = Counter(y[i] for _, i in dist[:k])
    top = max(votes.values())
    return min(c for c, v in votes.items() if v == top)


def gini(counts):
    n = sum(counts)
    return 1.0 - sum((c / n) ** 2 for c in counts)


def majority(labels):
    votes = Counter(labels)
    top = max(votes.values())
    return min(c for c, v in votes.items() if v == top)


def rapid_change(accel_rows, degenerate=0.05):
    """Largest per-axis angle step between consecutive usable samples."""
    angles = [direction_angles(a) for a in accel_rows if math.sqrt(sum(c * c for c in a)) > degenerate]
    best = 0.0
    for p, q in zip(angles, angles[1:]):
        best = max(best, *(abs(u - v) for u, v in zip(p, q)))
    return best


def range_scan(millis, t0, t1):
    """Indices with t0 <= t < t1 by linear scan."""
    return [i for i, t in enumerate(millis) if t0 <= t < t1]
