"""Piecewise linear complex: input points, segments and planar polygons.

Validation is rejection-only: inputs whose features intersect anywhere but
shared vertices/edges are reported, never repaired.  All intersection
decisions are made in exact rational arithmetic after a coarse bounding-box
prefilter, so validation never flips on near-degenerate inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import EmptyPLC
from .predicates import orient2d, orient3d


@dataclass
class PLC:
    """Immutable input complex: points P, segments E (index pairs into
    points) and polygons F (vertex-index cycles whose boundary edges are
    members of E)."""

    points: list = field(default_factory=list)
    segments: list = field(default_factory=list)
    polygons: list = field(default_factory=list)

    def __post_init__(self):
        self.points = [tuple(float(c) for c in p) for p in self.points]
        self.segments = [tuple(int(i) for i in s) for s in self.segments]
        self.polygons = [tuple(int(i) for i in poly) for poly in self.polygons]


def bounding_box(plc: PLC):
    """Componentwise min/max corners of the point set."""
    if not plc.points:
        raise EmptyPLC("PLC has no points")
    xs = [p[0] for p in plc.points]
    ys = [p[1] for p in plc.points]
    zs = [p[2] for p in plc.points]
    return (min(xs), min(ys), min(zs)), (max(xs), max(ys), max(zs))


def bbox_diagonal(plc: PLC) -> float:
    lo, hi = bounding_box(plc)
    return math.dist(lo, hi)


# ---------------------------------------------------------------------------
# exact helpers (Fractions over the raw float coordinates)

def _frac(p):
    return tuple(Fraction(c) for c in p)


def _collinear3d(a, b, c) -> bool:
    af, bf, cf = _frac(a), _frac(b), _frac(c)
    u = tuple(bf[k] - af[k] for k in range(3))
    v = tuple(cf[k] - af[k] for k in range(3))
    return (u[1] * v[2] - u[2] * v[1] == 0
            and u[2] * v[0] - u[0] * v[2] == 0
            and u[0] * v[1] - u[1] * v[0] == 0)


def _proj_axis(pts):
    """Dominant axis of the (exact) normal of a planar point cycle."""
    af = _frac(pts[0])
    nx = ny = nz = Fraction(0)
    for i in range(1, len(pts) - 1):
        u = tuple(Fraction(pts[i][k]) - af[k] for k in range(3))
        v = tuple(Fraction(pts[i + 1][k]) - af[k] for k in range(3))
        nx += u[1] * v[2] - u[2] * v[1]
        ny += u[2] * v[0] - u[0] * v[2]
        nz += u[0] * v[1] - u[1] * v[0]
    mags = [abs(nx), abs(ny), abs(nz)]
    return max(range(3), key=lambda k: mags[k])


def _drop(p, axis):
    return tuple(p[k] for k in range(3) if k != axis)


def _seg_point_between(a, b, p) -> bool:
    """p strictly inside segment ab (all collinear, any dimension)."""
    af, bf, pf = _frac(a), _frac(b), _frac(p)
    dot = sum((pf[k] - af[k]) * (bf[k] - af[k]) for k in range(len(af)))
    lsq = sum((bf[k] - af[k]) ** 2 for k in range(len(af)))
    return 0 < dot < lsq


def _segments_conflict(a, b, c, d) -> bool:
    """True iff open-set parts of segments ab and cd touch, i.e. they
    intersect anywhere except at shared endpoints."""
    shared = {tuple(a), tuple(b)} & {tuple(c), tuple(d)}
    if len(shared) == 2:
        return True  # identical segment listed twice
    if orient3d(a, b, c, d) != 0:
        return False
    if not _collinear3d(a, b, c) or not _collinear3d(a, b, d):
        # coplanar, non-collinear: project to 2D
        # find a projection axis where ab x cd geometry survives
        for axis in range(3):
            a2, b2, c2, d2 = (_drop(p, axis) for p in (a, b, c, d))
            o1 = orient2d(a2, b2, c2)
            o2 = orient2d(a2, b2, d2)
            o3 = orient2d(c2, d2, a2)
            o4 = orient2d(c2, d2, b2)
            if (o1, o2, o3, o4) == (0, 0, 0, 0):
                continue  # degenerate projection, try another axis
            return _segments_conflict_2d(a2, b2, c2, d2, shared)
        return False
    # all four collinear: 1D overlap beyond a shared endpoint
    for p, q in ((c, d), (d, c)):
        if tuple(p) in shared:
            other_a, other_b = (a, b) if tuple(p) == tuple(a) else (b, a)
            if _seg_point_between(a, b, q) or _seg_point_between(p, q, other_b):
                return True
            return False
    # no shared endpoint: overlap iff any endpoint inside the other segment
    return (_seg_point_between(a, b, c) or _seg_point_between(a, b, d)
            or _seg_point_between(c, d, a) or _seg_point_between(c, d, b))


def _segments_conflict_2d(a, b, c, d, shared) -> bool:
    o1 = orient2d(a, b, c)
    o2 = orient2d(a, b, d)
    o3 = orient2d(c, d, a)
    o4 = orient2d(c, d, b)
    if shared:
        # sharing one endpoint: conflict iff the other endpoint of one lies
        # in the interior of the other segment
        return ((o1 == 0 and _seg_point_between(a, b, c))
                or (o2 == 0 and _seg_point_between(a, b, d))
                or (o3 == 0 and _seg_point_between(c, d, a))
                or (o4 == 0 and _seg_point_between(c, d, b)))
    if o1 == 0 and o2 == 0:
        # collinear in projection
        return (_seg_point_between(a, b, c) or _seg_point_between(a, b, d)
                or _seg_point_between(c, d, a) or _seg_point_between(c, d, b)
                or (tuple(a) in (tuple(c), tuple(d)))
                or (tuple(b) in (tuple(c), tuple(d))))
    if o1 * o2 <= 0 and o3 * o4 <= 0:
        return True
    return False


def _point_in_polygon_2d(pts2, q) -> bool:
    """q inside or on the boundary of the simple polygon pts2 (exact)."""
    n = len(pts2)
    for i in range(n):
        a, b = pts2[i], pts2[(i + 1) % n]
        if orient2d(a, b, q) == 0:
            if tuple(q) in (tuple(a), tuple(b)) or _seg_point_between(a, b, q):
                return True
    inside = False
    qx, qy = Fraction(q[0]), Fraction(q[1])
    for i in range(n):
        ax, ay = Fraction(pts2[i][0]), Fraction(pts2[i][1])
        bx, by = Fraction(pts2[(i + 1) % n][0]), Fraction(pts2[(i + 1) % n][1])
        if (ay > qy) != (by > qy):
            xcross = ax + (qy - ay) * (bx - ax) / (by - ay)
            if xcross > qx:
                inside = not inside
    return inside


def _segment_polygon_conflict(plc, seg, poly) -> bool:
    """True iff segment touches the polygon anywhere but at features of the
    complex it legitimately shares (its endpoints as polygon vertices, or
    being a boundary edge)."""
    i, j = seg
    if i in poly and j in poly:
        k = poly.index(i)
        n = len(poly)
        if poly[(k + 1) % n] == j or poly[(k - 1) % n] == j:
            return False  # boundary edge of this polygon
    a = plc.points[i]
    b = plc.points[j]
    verts = [plc.points[v] for v in poly]
    p0, p1, p2 = verts[0], verts[1], verts[2]
    if _collinear3d(p0, p1, p2):
        for v in verts[3:]:
            if not _collinear3d(p0, p1, v):
                p2 = v
                break
    sa = orient3d(p0, p1, p2, a)
    sb = orient3d(p0, p1, p2, b)
    if sa * sb > 0:
        return False
    axis = _proj_axis(verts)
    verts2 = [_drop(v, axis) for v in verts]
    if sa == 0 and sb == 0:
        # in-plane segment: boundary crossings are caught by the pairwise
        # segment checks, so test representative interior points
        a2, b2 = _drop(a, axis), _drop(b, axis)
        mid = tuple((Fraction(a2[k]) + Fraction(b2[k])) / 2 for k in range(2))
        if _point_in_polygon_2d(verts2, mid):
            return True
        for v, idx in ((a2, i), (b2, j)):
            if idx not in poly and _point_in_polygon_2d(verts2, v):
                return True
        return False
    if sa == 0 or sb == 0:
        # one endpoint in the plane: conflict iff it touches the polygon
        # without being one of its vertices
        pt, idx = (a, i) if sa == 0 else (b, j)
        if idx in poly:
            return False
        return _point_in_polygon_2d(verts2, _drop(pt, axis))
    # proper crossing: intersection point is interior to the segment
    af, bf = _frac(a), _frac(b)
    p0f, p1f, p2f = _frac(p0), _frac(p1), _frac(p2)
    u = tuple(p1f[k] - p0f[k] for k in range(3))
    v = tuple(p2f[k] - p0f[k] for k in range(3))
    nrm = (u[1] * v[2] - u[2] * v[1],
           u[2] * v[0] - u[0] * v[2],
           u[0] * v[1] - u[1] * v[0])
    denom = sum(nrm[k] * (bf[k] - af[k]) for k in range(3))
    t = sum(nrm[k] * (p0f[k] - af[k]) for k in range(3)) / denom
    hit = tuple(af[k] + t * (bf[k] - af[k]) for k in range(3))
    hit2 = tuple(h for k, h in enumerate(hit) if k != axis)
    verts2f = [tuple(Fraction(c) for c in v) for v in verts2]
    return _point_in_polygon_2d(verts2f, hit2)


# ---------------------------------------------------------------------------
# bounding-box prefilter

def _aabb_of(pts):
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    zs = [p[2] for p in pts]
    return (min(xs), min(ys), min(zs)), (max(xs), max(ys), max(zs))


def _aabb_overlap(a, b) -> bool:
    return all(a[0][k] <= b[1][k] and b[0][k] <= a[1][k] for k in range(3))


def _grid_pairs(boxes, lo, hi, cells=32):
    """Yield index pairs whose AABBs share a grid cell (superset of the
    overlapping pairs; each pair yielded once)."""
    span = [max(hi[k] - lo[k], 1e-300) for k in range(3)]
    buckets = {}
    for idx, (bmin, bmax) in enumerate(boxes):
        c0 = [min(cells - 1, max(0, int((bmin[k] - lo[k]) / span[k] * cells)))
              for k in range(3)]
        c1 = [min(cells - 1, max(0, int((bmax[k] - lo[k]) / span[k] * cells)))
              for k in range(3)]
        for cx in range(c0[0], c1[0] + 1):
            for cy in range(c0[1], c1[1] + 1):
                for cz in range(c0[2], c1[2] + 1):
                    buckets.setdefault((cx, cy, cz), []).append(idx)
    seen = set()
    for members in buckets.values():
        for u in range(len(members)):
            for v in range(u + 1, len(members)):
                key = (members[u], members[v])
                if key not in seen:
                    seen.add(key)
                    yield key


# ---------------------------------------------------------------------------

def validate(plc: PLC) -> list:
    """Return every invariant violation as (code, detail) tuples; an empty
    list means the PLC is valid."""
    violations = []
    npts = len(plc.points)

    seen_pts = {}
    for idx, p in enumerate(plc.points):
        if any(not math.isfinite(c) for c in p):
            violations.append(("nonfinite-point", idx))
        elif p in seen_pts:
            violations.append(("duplicate-point", (seen_pts[p], idx)))
        else:
            seen_pts[p] = idx

    edge_set = set()
    ok_segments = []
    for sidx, (i, j) in enumerate(plc.segments):
        if not (0 <= i < npts and 0 <= j < npts):
            violations.append(("segment-bad-index", sidx))
            continue
        if i == j or plc.points[i] == plc.points[j]:
            violations.append(("segment-zero-length", sidx))
            continue
        key = (min(i, j), max(i, j))
        if key in edge_set:
            violations.append(("segment-duplicate", sidx))
            continue
        edge_set.add(key)
        ok_segments.append(sidx)

    ok_polygons = []
    for pidx, poly in enumerate(plc.polygons):
        if len(poly) < 3:
            violations.append(("polygon-too-few-vertices", pidx))
            continue
        if any(not (0 <= v < npts) for v in poly):
            violations.append(("polygon-bad-index", pidx))
            continue
        if len(set(poly)) != len(poly):
            violations.append(("polygon-repeated-vertex", pidx))
            continue
        verts = [plc.points[v] for v in poly]
        base = None
        for k in range(2, len(verts)):
            if not _collinear3d(verts[0], verts[1], verts[k]):
                base = (verts[0], verts[1], verts[k])
                break
        if base is None:
            violations.append(("polygon-degenerate", pidx))
            continue
        planar = all(orient3d(base[0], base[1], base[2], v) == 0
                     for v in verts)
        if not planar:
            violations.append(("polygon-non-planar", pidx))
            continue
        missing = []
        n = len(poly)
        for k in range(n):
            e = (min(poly[k], poly[(k + 1) % n]),
                 max(poly[k], poly[(k + 1) % n]))
            if e not in edge_set:
                missing.append(e)
        if missing:
            violations.append(("polygon-edge-not-in-segments", (pidx, missing)))
            continue
        # simplicity: non-adjacent boundary edges must not touch
        axis = _proj_axis(verts)
        verts2 = [_drop(v, axis) for v in verts]
        simple = True
        for u in range(n):
            for w in range(u + 1, n):
                if w == u + 1 or (u == 0 and w == n - 1):
                    continue
                if _segments_conflict_2d(verts2[u], verts2[(u + 1) % n],
                                         verts2[w], verts2[(w + 1) % n],
                                         set()):
                    simple = False
        if not simple:
            violations.append(("polygon-not-simple", pidx))
            continue
        ok_polygons.append(pidx)

    if violations:
        # feature-intersection checks assume structurally sound features
        return violations

    try:
        lo, hi = bounding_box(plc)
    except EmptyPLC:
        return violations

    seg_boxes = [_aabb_of([plc.points[i], plc.points[j]])
                 for (i, j) in plc.segments]
    poly_boxes = [_aabb_of([plc.points[v] for v in poly])
                  for poly in plc.polygons]

    nseg = len(plc.segments)
    boxes = seg_boxes + poly_boxes
    for u, v in _grid_pairs(boxes, lo, hi):
        if not _aabb_overlap(boxes[u], boxes[v]):
            continue
        if u < nseg and v < nseg:
            i, j = plc.segments[u]
            k, l = plc.segments[v]
            if _segments_conflict(plc.points[i], plc.points[j],
                                  plc.points[k], plc.points[l]):
                violations.append(("segment-segment-intersection", (u, v)))
        elif u < nseg <= v:
            if _segment_polygon_conflict(plc, plc.segments[u],
                                         plc.polygons[v - nseg]):
                violations.append(("segment-polygon-intersection",
                                   (u, v - nseg)))
        # polygon-polygon interior crossings necessarily cross the other
        # polygon's boundary segments, so the two checks above cover them

    return violations


def unit_cube() -> PLC:
    """The canonical valid complex: 8 points, 12 edges, 6 square polygons."""
    pts = [(float(x), float(y), float(z))
           for z in (0, 1) for y in (0, 1) for x in (0, 1)]
    idx = {(x, y, z): x + 2 * y + 4 * z for x in (0, 1) for y in (0, 1)
           for z in (0, 1)}
    faces = [
        [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)],
        [(0, 0, 1), (0, 1, 1), (1, 1, 1), (1, 0, 1)],
        [(0, 0, 0), (0, 0, 1), (1, 0, 1), (1, 0, 0)],
        [(0, 1, 0), (1, 1, 0), (1, 1, 1), (0, 1, 1)],
        [(0, 0, 0), (0, 1, 0), (0, 1, 1), (0, 0, 1)],
        [(1, 0, 0), (1, 0, 1), (1, 1, 1), (1, 1, 0)],
    ]
    polygons = [tuple(idx[c] for c in f) for f in faces]
    edges = set()
    for poly in polygons:
        n = len(poly)
        for k in range(n):
            e = (min(poly[k], poly[(k + 1) % n]),
                 max(poly[k], poly[(k + 1) % n]))
            edges.add(e)
    return PLC(points=pts, segments=sorted(edges), polygons=polygons)
