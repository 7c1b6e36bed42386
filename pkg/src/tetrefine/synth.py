"""Synthetic inputs: uniform point clouds plus disjoint axis-aligned
rectangles.

The rectangle count is floor(gamma * n_points).  Each rectangle is drawn
with a random center, a random axis pair, and edge lengths uniform in
[0.01, 0.1] of the domain diameter, and redrawn whenever it would leave
the domain or come too close to a previously placed rectangle.  Disjoint
bounding boxes make every cross-feature intersection test trivially
false, so the result always validates clean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PlacementFailure
from .plc import PLC

MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class SynthSpec:
    n_points: int
    gamma: float = 0.0
    distribution: str = "ball"
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 4:
            raise ValueError("n_points must be at least 4")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.distribution not in ("ball", "cube"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


def _sample_points(rng, n, distribution):
    if distribution == "cube":
        return rng.uniform(0.0, 1.0, size=(n, 3))
    pts = np.empty((n, 3))
    have = 0
    while have < n:
        cand = rng.uniform(-1.0, 1.0, size=(2 * (n - have) + 16, 3))
        keep = cand[np.einsum("ij,ij->i", cand, cand) <= 1.0]
        take = min(len(keep), n - have)
        pts[have:have + take] = keep[:take]
        have += take
    return pts


def _inside(distribution, corners):
    if distribution == "cube":
        return bool(np.all(corners >= 0.0) and np.all(corners <= 1.0))
    return bool(np.all(np.einsum("ij,ij->i", corners, corners) < 1.0))


def generate(spec: SynthSpec) -> PLC:
    """Deterministic PLC for the given spec; same seed, same complex."""
    rng = np.random.default_rng(spec.seed)
    pts = _sample_points(rng, spec.n_points, spec.distribution)
    diam = np.sqrt(3.0) if spec.distribution == "cube" else 2.0

    n_rect = int(spec.gamma * spec.n_points)
    lo_list, hi_list = [], []  # AABBs of accepted rectangles
    points = [tuple(float(c) for c in p) for p in pts]
    segments = []
    polygons = []

    for _ in range(n_rect):
        placed = False
        for _attempt in range(MAX_REJECTIONS):
            axis = int(rng.integers(3))  # the constant coordinate
            center = rng.uniform(-1.0, 1.0, size=3) if diam == 2.0 \
                else rng.uniform(0.0, 1.0, size=3)
            ext = rng.uniform(0.01 * diam, 0.1 * diam, size=2)
            u, v = [k for k in range(3) if k != axis]
            corners = np.tile(center, (4, 1))
            corners[:, u] += np.array([-1, 1, 1, -1]) * (ext[0] / 2)
            corners[:, v] += np.array([-1, -1, 1, 1]) * (ext[1] / 2)
            if not _inside(spec.distribution, corners):
                continue
            lo = corners.min(axis=0)
            hi = corners.max(axis=0)
            if lo_list:
                los = np.array(lo_list)
                his = np.array(hi_list)
                if bool(np.any(np.all((lo <= his) & (los <= hi), axis=1))):
                    continue
            base = len(points)
            points.extend(tuple(float(c) for c in q) for q in corners)
            idx = (base, base + 1, base + 2, base + 3)
            for k in range(4):
                a, b = idx[k], idx[(k + 1) % 4]
                segments.append((min(a, b), max(a, b)))
            polygons.append(idx)
            lo_list.append(lo)
            hi_list.append(hi)
            placed = True
            break
        if not placed:
            raise PlacementFailure(
                f"rectangle placement rejected {MAX_REJECTIONS} times")

    return PLC(points=points, segments=segments, polygons=polygons)
