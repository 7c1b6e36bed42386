"""Mesh quality and performance reporting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingBaseline

HIST_BINS = 36  # 5 degree bins over [0, 180]


@dataclass
class QualityReport:
    input_points: int = 0
    steiner_points: int = 0
    tet_count: int = 0
    bad_tet_count: int = 0
    skipped: list = field(default_factory=list)  # dicts: element, reason
    dihedral_histogram: list = field(default_factory=lambda: [0] * HIST_BINS)
    per_round: list = field(default_factory=list)
    total_time: float = 0.0


def _tet_coordinate_blocks(mesh):
    tets = np.array(mesh.real_tets(), dtype=np.int64)
    if len(tets) == 0:
        return tets, None
    tv = mesh.tv[tets]
    pts = mesh.points[:mesh.nv]
    return tets, np.stack([pts[tv[:, k]] for k in range(4)], axis=1)


def radius_edge_ratios(mesh):
    """Radius-edge ratio of every alive real tet, vectorized."""
    tets, P = _tet_coordinate_blocks(mesh)
    if P is None:
        return tets, np.empty(0)
    a, b, c, d = P[:, 0], P[:, 1], P[:, 2], P[:, 3]
    u, v, w = b - a, c - a, d - a
    vw = np.cross(v, w)
    denom = 2.0 * np.einsum("ij,ij->i", u, vw)
    lu = np.einsum("ij,ij->i", u, u)
    lv = np.einsum("ij,ij->i", v, v)
    lw = np.einsum("ij,ij->i", w, w)
    num = (lu[:, None] * vw + lv[:, None] * np.cross(w, u)
           + lw[:, None] * np.cross(u, v))
    with np.errstate(divide="ignore", invalid="ignore"):
        off = num / denom[:, None]
    r2 = np.einsum("ij,ij->i", off, off)
    e = np.empty((len(P), 6))
    pairs = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    for k, (i, j) in enumerate(pairs):
        dif = P[:, i] - P[:, j]
        e[:, k] = np.einsum("ij,ij->i", dif, dif)
    shortest = e.min(axis=1)
    with np.errstate(invalid="ignore"):
        ratios = np.sqrt(r2 / shortest)
    # flat tets whose float determinant cancels: unbounded, not good
    return tets, np.where(np.isfinite(ratios), ratios, np.inf)


def dihedral_histogram(mesh):
    """Counts of all six dihedral angles of every real tet in 5-degree
    bins over [0, 180]."""
    _, P = _tet_coordinate_blocks(mesh)
    hist = np.zeros(HIST_BINS, dtype=np.int64)
    if P is None:
        return hist
    pairs = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    for (i, j) in pairs:
        k, l = [m for m in range(4) if m not in (i, j)]
        e = P[:, j] - P[:, i]
        n1 = np.cross(e, P[:, k] - P[:, i])
        n2 = np.cross(e, P[:, l] - P[:, i])
        dot = np.einsum("ij,ij->i", n1, n2)
        nrm = np.sqrt(np.einsum("ij,ij->i", n1, n1)
                      * np.einsum("ij,ij->i", n2, n2))
        with np.errstate(invalid="ignore"):
            cosang = np.clip(dot / nrm, -1.0, 1.0)
        ang = np.degrees(np.arccos(cosang))
        idx = np.clip((ang / 5.0).astype(np.int64), 0, HIST_BINS - 1)
        np.add.at(hist, idx, 1)
    return hist


def analyze(mesh, B) -> QualityReport:
    """Full-scan quality report (timings and skip list are filled in by
    the refinement driver)."""
    rep = QualityReport()
    origins = mesh.vert_origin[:mesh.nv]
    rep.input_points = int(np.count_nonzero(origins == 0))
    rep.steiner_points = int(np.count_nonzero(origins == 1))
    _, ratios = radius_edge_ratios(mesh)
    rep.tet_count = len(ratios)
    rep.bad_tet_count = int(np.count_nonzero(ratios > B))
    rep.dihedral_histogram = [int(x) for x in dihedral_histogram(mesh)]
    return rep


def speedup_table(runs):
    """Normalize wall times to the 1-worker baseline."""
    base = None
    for workers, t in runs:
        if workers == 1:
            base = t
            break
    if base is None:
        raise MissingBaseline("no 1-worker run present")
    return [(workers, base / t) for workers, t in runs]
