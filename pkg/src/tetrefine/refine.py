"""Round-based quality refinement driver.

Each round picks the highest-pending element class (encroached
subsegments, then encroached subfaces, then bad tets), computes splitting
points, redirects circumcenters that would encroach a constraint,
filters the candidates down to a disjoint-region set, and inserts the
survivors.  Encroachment is tracked incrementally (new vertices against
nearby constraints, new constraints against nearby vertices) and the
final state is certified by full scans before the driver declares the
mesh done.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (CavityNotStarShaped, InvalidPLC, TooClose)
from .facets import FacetComplex
from .geometry import (circumcircle_tri, circumsphere_tet,
                       encroaches_face, encroaches_segment)
from .growblast import filter_candidates
from .mesh import ElementRef, Mesh
from .plc import (PLC, _point_in_polygon_2d, _proj_axis, bounding_box,
                  validate)
from . import stats

MASK64 = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


_CLASS_RANK = {"subsegment": 0, "subface": 1, "tet": 2}


def make_priority(kind, canon, round_no, seed):
    """Total order over a round's candidates: subsegments before subfaces
    before tets, then a seeded hash of the canonical vertex ids (avoids
    spatial bias from id locality), then the ids themselves."""
    h = splitmix64(seed ^ (round_no * 0x9E3779B97F4A7C15 & MASK64))
    for v in canon:
        h = splitmix64(h ^ ((v + 2) & MASK64))
    return (_CLASS_RANK[kind], h, tuple(canon))


@dataclass
class SplitCandidate:
    target: ElementRef
    point: tuple
    priority: tuple
    region: object = None
    seed: object = None            # region seed when target isn't in mesh
    allowed_cross: frozenset = frozenset()
    claim_extra: frozenset = frozenset()
    sid: int = None                # parent segment (subsegment splits)
    pid: int = None                # parent polygon (subface splits)
    fail_reason: str = None

    @property
    def kind(self):
        return self.target.kind


@dataclass
class RefineConfig:
    B: float = 2.0
    max_rounds: int = 500
    workers: int = 1
    sequential_until: int = 50000  # hybrid: single-worker below this size
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("B must be positive")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def splitting_point(mesh, e: ElementRef):
    """Midpoint / subface circumcenter / tet circumcenter."""
    if e.kind == "subsegment":
        u, v = e.index
        pu, pv = mesh.point(u), mesh.point(v)
        return ((pu[0] + pv[0]) / 2.0, (pu[1] + pv[1]) / 2.0,
                (pu[2] + pv[2]) / 2.0)
    if e.kind == "subface":
        a, b, c = (mesh.point(v) for v in e.index)
        return circumcircle_tri(a, b, c).center
    if e.kind == "tet":
        a, b, c, d = mesh.tet_points(e.index)
        return circumsphere_tet(a, b, c, d).center
    raise ValueError(f"bad element kind {e.kind}")


class ConstraintIndex:
    """Subsegment / subface bounding spheres with radius-binned KD trees
    for batched encroachment queries.  Float tests are confirmed by the
    exact predicates near the boundary."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.seg_rows = {}   # key -> row
        self.seg_keys = []
        self.seg_data = np.empty((0, 4))  # cx, cy, cz, r2
        self.face_rows = {}
        self.face_keys = []
        self.face_data = np.empty((0, 4))
        self._trees = None

    def _append(self, which, key, center, r2):
        rows, keys = ((self.seg_rows, self.seg_keys) if which == "seg"
                      else (self.face_rows, self.face_keys))
        if key in rows:
            return
        data = self.seg_data if which == "seg" else self.face_data
        row = len(keys)
        if row >= data.shape[0]:
            data = np.resize(data, (max(64, 2 * data.shape[0]), 4))
            if which == "seg":
                self.seg_data = data
            else:
                self.face_data = data
        data[row, :3] = center
        data[row, 3] = r2
        rows[key] = row
        keys.append(key)
        self._trees = None

    def add_seg(self, key):
        pu = self.mesh.point(key[0])
        pv = self.mesh.point(key[1])
        mid = tuple((pu[k] + pv[k]) / 2.0 for k in range(3))
        r2 = sum((pu[k] - mid[k]) ** 2 for k in range(3))
        self._append("seg", key, mid, r2)

    def remove_seg(self, key):
        row = self.seg_rows.pop(key, None)
        if row is not None:
            self.seg_keys[row] = None
            self._trees = None

    def add_face(self, key):
        a, b, c = (self.mesh.point(v) for v in key)
        sph = circumcircle_tri(a, b, c)
        self._append("face", key, sph.center, sph.radius_sq)

    def remove_face(self, key):
        row = self.face_rows.pop(key, None)
        if row is not None:
            self.face_keys[row] = None
            self._trees = None

    def _compact(self, which):
        rows, keys = ((self.seg_rows, self.seg_keys) if which == "seg"
                      else (self.face_rows, self.face_keys))
        data = self.seg_data if which == "seg" else self.face_data
        live = [k for k in keys if k is not None]
        newdata = np.empty((max(64, len(live)), 4))
        for i, key in enumerate(live):
            newdata[i] = data[rows[key]]
            rows[key] = i
        keys[:] = live
        if which == "seg":
            self.seg_data = newdata
        else:
            self.face_data = newdata

    def _build_trees(self):
        if self._trees is not None:
            return
        for which in ("seg", "face"):
            keys = self.seg_keys if which == "seg" else self.face_keys
            rows = self.seg_rows if which == "seg" else self.face_rows
            if len(rows) < len(keys) // 2:
                self._compact(which)
        self._trees = {}
        for which, keys, rows, data in (
                ("seg", self.seg_keys, self.seg_rows, self.seg_data),
                ("face", self.face_keys, self.face_rows, self.face_data)):
            bins = {}
            for key in keys:
                if key is None:
                    continue
                row = rows[key]
                r2 = data[row, 3]
                b = max(0, int(math.log2(max(r2, 1e-300))) // 2)
                bins.setdefault(b, []).append(row)
            built = []
            for b, rowlist in bins.items():
                arr = np.array(rowlist, dtype=np.int64)
                rmax = math.sqrt(float(data[arr, 3].max()))
                built.append((cKDTree(data[arr, :3]), arr, rmax))
            self._trees[which] = built

    def _query(self, which, pts):
        """For each query point: keys of constraints whose bounding ball
        strictly contains it (exact decisions near the ball surface)."""
        self._build_trees()
        keys = self.seg_keys if which == "seg" else self.face_keys
        data = self.seg_data if which == "seg" else self.face_data
        out = [[] for _ in range(len(pts))]
        pts = np.asarray(pts, dtype=np.float64)
        for tree, arr, rmax in self._trees[which]:
            hits = tree.query_ball_point(pts, rmax * (1.0 + 1e-9))
            qis, rows = [], []
            for qi, rowids in enumerate(hits):
                for local in rowids:
                    row = int(arr[local])
                    if keys[row] is not None:
                        qis.append(qi)
                        rows.append(row)
            if not qis:
                continue
            qarr = np.array(qis, dtype=np.int64)
            rarr = np.array(rows, dtype=np.int64)
            diff = pts[qarr] - data[rarr, :3]
            d2 = np.einsum("ij,ij->i", diff, diff)
            r2 = data[rarr, 3]
            near = np.abs(d2 - r2) <= 1e-9 * (d2 + r2)
            inside = d2 < r2
            for k in range(len(qis)):
                key = keys[rows[k]]
                if near[k]:
                    if self._exact(which, key, tuple(pts[qis[k]])):
                        out[qis[k]].append(key)
                elif inside[k]:
                    out[qis[k]].append(key)
        return out

    def _exact(self, which, key, p):
        if which == "seg":
            return encroaches_segment(
                (self.mesh.point(key[0]), self.mesh.point(key[1])), p)
        return encroaches_face(
            tuple(self.mesh.point(v) for v in key), p)

    def encroached_segs(self, pts):
        return self._query("seg", pts)

    def encroached_faces(self, pts):
        return self._query("face", pts)


def circumcenter_rejection(mesh, c, index=None):
    """Redirection rule: a subface/tet splitting point that would encroach
    a subsegment (or, for tets, a subface) is not inserted; the encroached
    elements are split instead.  Returns "accept" or the redirect list."""
    if index is None:
        index = ConstraintIndex(mesh)
        for key in mesh.subsegments:
            index.add_seg(key)
        for key in mesh.subfaces:
            index.add_face(key)
    redirects = []
    segs = index.encroached_segs([c.point])[0]
    for key in segs:
        redirects.append(ElementRef("subsegment", key))
    if c.kind == "tet" and not redirects:
        faces = index.encroached_faces([c.point])[0]
        for key in faces:
            if key != getattr(c.target, "index", None):
                redirects.append(ElementRef("subface", key))
    return "accept" if not redirects else redirects


def collect_candidates(mesh, B, phase, round_no=0, seed=0):
    """Full-scan candidate collection (reference semantics; the driver
    uses incrementally tracked sets plus final full scans)."""
    out = []
    if phase == "segments":
        verts = mesh.points[:mesh.nv]
        tree = cKDTree(verts) if mesh.nv else None
        for key in sorted(mesh.subsegments):
            if not mesh.edge_exists(*key):
                enc = True
            else:
                enc = _seg_encroached_scan(mesh, tree, key)
            if enc:
                out.append(_candidate(mesh, "subsegment", key,
                                      round_no, seed))
    elif phase == "faces":
        verts = mesh.points[:mesh.nv]
        tree = cKDTree(verts) if mesh.nv else None
        for key in sorted(mesh.subfaces):
            if mesh.find_tet_with_face(key)[0] < 0:
                enc = True
            else:
                enc = _face_encroached_scan(mesh, tree, key)
            if enc:
                out.append(_candidate(mesh, "subface", key, round_no, seed))
    elif phase == "tets":
        _, ratios = stats.radius_edge_ratios(mesh)
        tets = mesh.real_tets()
        for t, r in zip(tets, ratios):
            if r > B and not mesh.skip_flag[t]:
                out.append(_candidate(mesh, "tet", t, round_no, seed))
    else:
        raise ValueError(f"bad phase {phase}")
    return out


def _seg_encroached_scan(mesh, tree, key):
    pu, pv = mesh.point(key[0]), mesh.point(key[1])
    mid = tuple((pu[k] + pv[k]) / 2.0 for k in range(3))
    r = math.dist(pu, pv) / 2.0
    for v in tree.query_ball_point(mid, r * (1.0 + 1e-9)):
        if v in key:
            continue
        if encroaches_segment((pu, pv), mesh.point(v)):
            return True
    return False


def _face_encroached_scan(mesh, tree, key):
    tri = tuple(mesh.point(v) for v in key)
    sph = circumcircle_tri(*tri)
    r = math.sqrt(sph.radius_sq)
    for v in tree.query_ball_point(sph.center, r * (1.0 + 1e-9)):
        if v in key:
            continue
        if encroaches_face(tri, mesh.point(v)):
            return True
    return False


def _candidate(mesh, kind, key, round_no, seed, facets=None):
    """Build a SplitCandidate for an element named by tet id (tets) or
    sorted vertex tuple (subsegments / subfaces)."""
    if kind == "tet":
        canon = tuple(sorted(int(v) for v in mesh.tv[key]))
        ref = ElementRef("tet", int(key))
        point = splitting_point(mesh, ref)
        return SplitCandidate(ref, point,
                              make_priority("tet", canon, round_no, seed))
    ref = ElementRef(kind, key)
    point = splitting_point(mesh, ref)
    cand = SplitCandidate(ref, point,
                          make_priority(kind, key, round_no, seed))
    if kind == "subsegment":
        cand.sid = mesh.subsegments[key]
        if not mesh.edge_exists(*key):
            cand.seed = _walk_seed(mesh, point, key[0])
    else:
        cand.pid = mesh.subfaces[key]
        if mesh.find_tet_with_face(key)[0] < 0:
            cand.seed = _walk_seed(mesh, point, key[0])
    if facets is not None:
        # any subface of the facets the split point lies on may be
        # retiled; the region computation reports which ones actually are
        if kind == "subsegment":
            pids = facets.polygons_of_segment(cand.sid)
        else:
            pids = (cand.pid,)
        allow = set()
        for pid in pids:
            allow |= facets.keys_by_pid[pid]
        cand.allowed_cross = frozenset(k for k in allow
                                       if k in mesh.subfaces)
        if kind == "subsegment":
            cand.claim_extra = frozenset({("subsegment", key)})
        else:
            cand.claim_extra = frozenset({("face", key)})
    return cand


def _obstructed_subface(mesh, t, c):
    """Subface through which the straight walk from tet t toward c leaves
    the hull, or None when c is inside (or on) the hull.  Used to redirect
    tet circumcenters that fall outside the domain: with every hull face
    registered as a subface, leaving the hull always crosses one."""
    from .predicates import orient3d as _o3
    cur = int(t)
    prev = -1
    max_steps = int(10 * max(1.0, mesh.nt) ** (1.0 / 3.0)) + 64
    for step in range(max_steps):
        if mesh.is_ghost(cur):
            key = mesh.face_key(cur, 3)
            return key if key in mesh.subfaces else None
        moved = False
        for k in range(4):
            i = (k + step) & 3
            u = int(mesh.tn[cur, i]) >> 2
            if u == prev:
                continue
            fv = mesh.face_vertices(cur, i)
            if _o3(mesh.point(fv[0]), mesh.point(fv[1]),
                   mesh.point(fv[2]), c) > 0:
                if mesh.is_ghost(u):
                    key = mesh.face_key(cur, i)
                    return key if key in mesh.subfaces else None
                prev = cur
                cur = u
                moved = True
                break
        if not moved:
            return None
    end = mesh._walk(c, t)
    if mesh.is_ghost(end):
        key = mesh.face_key(end, 3)
        return key if key in mesh.subfaces else None
    return None


def _walk_seed(mesh, point, near_vertex):
    hint = int(mesh.vert_tet[near_vertex])
    return int(mesh._walk(point, hint if hint >= 0 else None))


def _hull_covered(plc):
    """True when the input polygons tile the whole convex hull of the
    input points (so the domain boundary is already protected)."""
    from fractions import Fraction

    from scipy.spatial import ConvexHull
    from scipy.spatial import QhullError

    polys = list(plc.polygons)
    poly_vsets = [frozenset(p) for p in polys]
    proj = {}

    def poly2d(pid):
        hit = proj.get(pid)
        if hit is None:
            pts = [plc.points[v] for v in polys[pid]]
            axis = _proj_axis(pts)
            keep = [k for k in range(3) if k != axis]
            hit = (keep, [(q[keep[0]], q[keep[1]]) for q in pts])
            proj[pid] = hit
        return hit

    def covered(tri):
        vs = set(tri)
        for pid, vset in enumerate(poly_vsets):
            if vs <= vset:
                keep, pts2 = poly2d(pid)
                cx = sum(Fraction(plc.points[v][keep[0]]) for v in tri) / 3
                cy = sum(Fraction(plc.points[v][keep[1]]) for v in tri) / 3
                if _point_in_polygon_2d(pts2, (cx, cy)):
                    return True
        return False

    try:
        hull = ConvexHull(np.asarray(plc.points))
    except QhullError:
        return False
    return all(covered(tuple(int(v) for v in simplex))
               for simplex in hull.simplices)


def augment_with_box(plc):
    """Close the mesh domain: when the input polygons do not already tile
    the convex hull, wrap the points in a padded axis-aligned bounding box
    of six rectangle facets.  Circumcenters escaping the domain then
    always cross a protected subface, so refinement cannot grow the hull
    without bound.  The box is axis-aligned on purpose: midpoints and
    circumcenters of axis-aligned constraints preserve the constant
    coordinate exactly, so every boundary Steiner point lies exactly on
    its facet plane and the planar triangulations never drift from the
    tetrahedral mesh.  Returns a PLC with the box corners, edges and faces
    appended after the input features."""
    if plc.polygons and _hull_covered(plc):
        return plc
    lo, hi = bounding_box(plc)
    pad = 0.25 * math.dist(lo, hi)
    lo = tuple(c - pad for c in lo)
    hi = tuple(c + pad for c in hi)
    n = len(plc.points)

    def corner(i, j, k):
        return n + 4 * i + 2 * j + k

    corners = [(lo[0] if i == 0 else hi[0],
                lo[1] if j == 0 else hi[1],
                lo[2] if k == 0 else hi[2])
               for i in (0, 1) for j in (0, 1) for k in (0, 1)]
    faces = []
    for axis in range(3):
        for side in (0, 1):
            quad = []
            for (a, b) in ((0, 0), (0, 1), (1, 1), (1, 0)):
                bits = [0, 0, 0]
                bits[axis] = side
                bits[(axis + 1) % 3] = a
                bits[(axis + 2) % 3] = b
                quad.append(corner(*bits))
            faces.append(quad)
    edges = set()
    for quad in faces:
        for k in range(4):
            u, v = quad[k], quad[(k + 1) % 4]
            edges.add((min(u, v), max(u, v)))
    return PLC(points=list(plc.points) + corners,
               segments=list(plc.segments) + sorted(edges),
               polygons=list(plc.polygons) + faces)


class _Driver:
    def __init__(self, plc, cfg):
        self.plc = plc
        self.cfg = cfg
        self.report = stats.QualityReport()
        self.enc_segs = set()
        self.enc_faces = set()
        self.blocked_segs = set()
        self.blocked_faces = set()
        self.skipped_keys = set()
        self.lmin = 0.0

    # -- setup --------------------------------------------------------------

    def setup(self):
        violations = validate(self.plc)
        if violations:
            raise InvalidPLC(violations)
        cfg = self.cfg
        aug = augment_with_box(self.plc)
        self.mesh = Mesh.init_delaunay(aug.points, shuffle_seed=cfg.seed)
        for v in range(len(self.plc.points), len(aug.points)):
            self.mesh.vert_origin[v] = 1
        self.lmin = 1e-4 * self.mesh.bbox_diag
        self.facets = FacetComplex(aug) if aug.polygons else None
        for sid, (u, v) in enumerate(aug.segments):
            self.mesh.subsegments[(min(u, v), max(u, v))] = sid
        if self.facets is not None:
            for key, pid in self.facets.initial_subfaces():
                self.mesh.subfaces[key] = pid
        self.mesh.refresh_all_masks()
        self.index = ConstraintIndex(self.mesh)
        for key in self.mesh.subsegments:
            self.index.add_seg(key)
        for key in self.mesh.subfaces:
            self.index.add_face(key)
        self.full_verify()

    # -- verification scans -------------------------------------------------

    def full_verify(self) -> bool:
        """Scan every constraint for presence and encroachment; refill the
        pending sets.  Returns True when anything is pending."""
        mesh = self.mesh
        found = False
        tree = cKDTree(mesh.points[:mesh.nv])
        for key in mesh.subsegments:
            if key in self.skipped_keys or key in self.enc_segs:
                continue
            if not mesh.edge_exists(*key) \
                    or _seg_encroached_scan(mesh, tree, key):
                self.enc_segs.add(key)
                found = True
        for key in mesh.subfaces:
            if key in self.skipped_keys or key in self.enc_faces:
                continue
            if mesh.find_tet_with_face(key)[0] < 0 \
                    or _face_encroached_scan(mesh, tree, key):
                self.enc_faces.add(key)
                found = True
        self.blocked_segs.clear()
        self.blocked_faces.clear()
        return found or bool(self.enc_segs) or bool(self.enc_faces)

    def _bad_tets(self):
        mesh = self.mesh
        n = mesh.nt
        mask = ((mesh.alive[:n] == 1) & (mesh.tv[:n, 3] >= 0)
                & (mesh.ratio[:n] > self.cfg.B)
                & (mesh.skip_flag[:n] == 0))
        return np.flatnonzero(mask)

    # -- pool construction --------------------------------------------------

    def build_pool(self, round_no):
        mesh = self.mesh
        seed = self.cfg.seed

        segs = [k for k in sorted(self.enc_segs - self.blocked_segs)
                if k in mesh.subsegments and k not in self.skipped_keys]
        self.enc_segs.intersection_update(mesh.subsegments)
        if segs:
            pool = [_candidate(mesh, "subsegment", k, round_no, seed,
                               self.facets) for k in segs]
            return "segments", pool

        faces = [k for k in sorted(self.enc_faces - self.blocked_faces)
                 if k in mesh.subfaces and k not in self.skipped_keys]
        self.enc_faces.intersection_update(mesh.subfaces)
        if faces:
            pool = []
            redirect_segs = set()
            cands = [_candidate(mesh, "subface", k, round_no, seed,
                                self.facets) for k in faces]
            hits = self.index.encroached_segs([c.point for c in cands])
            for c, hit in zip(cands, hits):
                hit = [k for k in hit if k not in self.skipped_keys]
                if hit:
                    redirect_segs.update(hit)
                else:
                    pool.append(c)
            for k in sorted(redirect_segs):
                pool.append(_candidate(mesh, "subsegment", k, round_no,
                                       seed, self.facets))
            return "faces", pool

        bad = self._bad_tets()
        if len(bad):
            pool = []
            redirect_segs = set()
            redirect_faces = set()
            cands = []
            for t in bad:
                try:
                    c = _candidate(mesh, "tet", int(t), round_no, seed)
                except Exception:
                    mesh.skip_flag[t] = 1
                    self._record_skip("tet", t, "degenerate")
                    continue
                a, b, cc, d = mesh.tet_points(int(t))
                r2 = circumsphere_tet(a, b, cc, d).radius_sq
                if r2 < self.lmin * self.lmin:
                    mesh.skip_flag[t] = 1
                    self._record_skip("tet", t, "short_edge")
                    continue
                cands.append(c)
            if cands:
                seg_hits = self.index.encroached_segs(
                    [c.point for c in cands])
                face_hits = self.index.encroached_faces(
                    [c.point for c in cands])
                for c, sh, fh in zip(cands, seg_hits, face_hits):
                    sh = [k for k in sh if k not in self.skipped_keys]
                    fh = [k for k in fh if k not in self.skipped_keys]
                    if sh:
                        redirect_segs.update(sh)
                    elif fh:
                        redirect_faces.update(fh)
                    else:
                        hull = _obstructed_subface(mesh, c.target.index,
                                                   c.point)
                        if hull is not None and \
                                hull not in self.skipped_keys:
                            redirect_faces.add(hull)
                        else:
                            pool.append(c)
            for k in sorted(redirect_segs):
                if k in mesh.subsegments:
                    pool.append(_candidate(mesh, "subsegment", k, round_no,
                                           seed, self.facets))
            for k in sorted(redirect_faces):
                if k in mesh.subfaces and k not in redirect_segs:
                    pool.append(_candidate(mesh, "subface", k, round_no,
                                           seed, self.facets))
            if pool:
                return "tets", pool
        return None, []

    # -- insertion ----------------------------------------------------------

    def _record_skip(self, kind, ident, reason):
        if kind == "tet":
            canon = tuple(sorted(int(v) for v in self.mesh.tv[ident]))
        else:
            canon = tuple(ident)
        self.report.skipped.append(
            {"kind": kind, "vertices": list(canon), "reason": reason})

    def _crossed_by_pid(self, region):
        out = {}
        for key in region.crossed_subfaces:
            pid = self.mesh.subfaces.get(key)
            if pid is not None:
                out.setdefault(pid, []).append(key)
        return out

    def insert_candidate(self, c):
        """Apply one accepted candidate; returns the new vertex id."""
        mesh = self.mesh
        vid_expected = mesh.nv
        if c.kind == "subsegment":
            key = c.target.index
            if self.facets is not None:
                rem, add = self.facets.split_segment(
                    c.sid, key, vid_expected, c.point,
                    self._crossed_by_pid(c.region))
            else:
                rem, add = [], []
            vid = mesh.insert_point(c.point, c.region, origin=1,
                                    split_edge=key, subface_removed=rem,
                                    subface_added=add)
            assert vid == vid_expected
            self.index.remove_seg(key)
            self.enc_segs.discard(key)
            u, v = key
            for child in ((min(u, vid), max(u, vid)),
                          (min(v, vid), max(v, vid))):
                self.index.add_seg(child)
                self.round_new_segs.append(child)
            self._apply_face_delta(rem, add)
        elif c.kind == "subface":
            key = c.target.index
            crossed = self._crossed_by_pid(c.region).get(c.pid, ())
            rem, add = self.facets.split_facet(c.pid, vid_expected, c.point,
                                               crossed)
            vid = mesh.insert_point(c.point, c.region, origin=1,
                                    subface_removed=rem, subface_added=add)
            assert vid == vid_expected
            self._apply_face_delta(rem, add)
        else:
            vid = mesh.insert_point(c.point, c.region, origin=1)
        if c.kind != "tet":
            # subfaces removed from the dicts by the 2D retiling but not
            # crossed by the 3D cavity survive as plain mesh faces; clear
            # their constraint bits on the surviving tets
            crossed = set(c.region.crossed_subfaces)
            for k in rem:
                if k in crossed:
                    continue
                t, i = mesh.find_tet_with_face(k)
                if t >= 0:
                    mesh._refresh_masks(t)
                    u = int(mesh.tn[t, i]) >> 2
                    if u >= 0 and mesh.alive[u]:
                        mesh._refresh_masks(u)
        self.round_new_verts.append(vid)
        self.round_dirty_faces.update(c.region.boundary_subfaces)
        self.round_dirty_segs.update(c.region.boundary_subsegments)
        return vid

    def _apply_face_delta(self, rem, add):
        for k in rem:
            self.index.remove_face(k)
            self.enc_faces.discard(k)
        for k, _pid in add:
            self.index.add_face(k)
            self.round_new_faces.append(k)
            self.round_dirty_faces.add(k)

    def _fallback(self, c, round_no):
        """Sequential retry of a candidate whose concurrent-path cavity
        failed; runs on the post-insertion mesh with fresh state."""
        mesh = self.mesh
        key = c.target.index
        if c.kind == "tet" and not (0 <= key < mesh.nt
                                    and mesh.alive[key]):
            return False
        if c.kind == "subsegment" and key not in mesh.subsegments:
            return False
        if c.kind == "subface" and key not in mesh.subfaces:
            return False
        try:
            fresh = _candidate(mesh, c.kind,
                               key if c.kind != "tet" else int(key),
                               round_no, self.cfg.seed, self.facets)
            if c.kind == "tet":
                hull = _obstructed_subface(mesh, key, fresh.point)
                if hull is not None:
                    if hull in mesh.subfaces and \
                            hull not in self.skipped_keys:
                        self.enc_faces.add(hull)
                    return False
            seed = fresh.seed if fresh.seed is not None else fresh.target
            fresh.region = mesh.delaunay_region(
                fresh.point, seed, allowed_cross=fresh.allowed_cross)
            if fresh.region.min_vertex_dist_sq <= mesh.too_close_sq:
                raise TooClose("fallback point coincides with a vertex")
            if c.kind == "tet" and \
                    fresh.region.min_vertex_dist_sq < self.lmin ** 2:
                mesh.skip_flag[key] = 1
                self._record_skip("tet", key, "short_edge")
                return False
            self.insert_candidate(fresh)
            return True
        except TooClose:
            self._skip_candidate(c, "too_close")
        except CavityNotStarShaped as err:
            membranes = getattr(err, "membrane_keys", None)
            if membranes:
                for mk in membranes:
                    if mk in mesh.subfaces:
                        self.enc_faces.add(mk)
                if c.kind == "subsegment":
                    self.blocked_segs.add(key)
                elif c.kind == "subface":
                    self.blocked_faces.add(key)
                else:
                    pass  # tet will be retried after the subface splits
            else:
                self._skip_candidate(c, "cavity_not_star_shaped")
        return False

    def _skip_candidate(self, c, reason):
        mesh = self.mesh
        if c.kind == "tet":
            t = c.target.index
            if 0 <= t < mesh.nt and mesh.alive[t]:
                mesh.skip_flag[t] = 1
                self._record_skip("tet", t, reason)
        else:
            self.skipped_keys.add(c.target.index)
            self._record_skip(c.kind, c.target.index, reason)
            self.enc_segs.discard(c.target.index)
            self.enc_faces.discard(c.target.index)

    # -- post-round bookkeeping ---------------------------------------------

    def post_round(self):
        mesh = self.mesh
        # new vertices against nearby constraints
        if self.round_new_verts:
            pts = mesh.points[self.round_new_verts]
            for keys in self.index.encroached_segs(pts):
                for key in keys:
                    if key not in self.skipped_keys:
                        self.enc_segs.add(key)
            for keys in self.index.encroached_faces(pts):
                for key in keys:
                    if key not in self.skipped_keys:
                        self.enc_faces.add(key)
        # new constraints against existing vertices; also presence checks
        check_segs = {k for k in self.round_new_segs
                      if k in mesh.subsegments}
        check_segs.update(k for k in self.round_dirty_segs
                          if k in mesh.subsegments)
        check_faces = {k for k in self.round_new_faces
                       if k in mesh.subfaces}
        check_faces.update(k for k in self.round_dirty_faces
                           if k in mesh.subfaces)
        if check_segs or check_faces:
            tree = cKDTree(mesh.points[:mesh.nv])
            for key in check_segs:
                if key in self.skipped_keys or key in self.enc_segs:
                    continue
                if not mesh.edge_exists(*key) \
                        or _seg_encroached_scan(mesh, tree, key):
                    self.enc_segs.add(key)
            for key in check_faces:
                if key in self.skipped_keys or key in self.enc_faces:
                    continue
                if mesh.find_tet_with_face(key)[0] < 0 \
                        or _face_encroached_scan(mesh, tree, key):
                    self.enc_faces.add(key)
        if self.round_new_verts:
            self.blocked_segs.clear()
            self.blocked_faces.clear()
        # reclaim dead tet slots once they dominate
        if mesh.nt > 4096 and \
                np.count_nonzero(mesh.alive[:mesh.nt]) * 2 < mesh.nt:
            mesh.compact()

    # -- main loop ----------------------------------------------------------

    def alive_elements(self):
        return (self.mesh.n_real_tets() + len(self.mesh.subsegments)
                + len(self.mesh.subfaces))

    def run(self):
        t0 = time.perf_counter()
        self.setup()
        cfg = self.cfg
        round_no = 0
        while round_no < cfg.max_rounds:
            phase, pool = self.build_pool(round_no)
            if phase is None:
                if not self.full_verify():
                    break
                round_no += 1
                continue
            tstart = time.perf_counter()
            self.round_new_verts = []
            self.round_new_segs = []
            self.round_new_faces = []
            self.round_dirty_faces = set()
            self.round_dirty_segs = set()
            workers = 1 if self.alive_elements() <= cfg.sequential_until \
                else cfg.workers
            accepted, rejected, failed = filter_candidates(
                self.mesh, pool, workers=workers,
                schedule_seed=splitmix64(cfg.seed ^ round_no))
            inserted = 0
            for c in accepted:
                if c.kind == "tet" and \
                        c.region.min_vertex_dist_sq < self.lmin ** 2:
                    self._skip_candidate(c, "short_edge")
                    continue
                self.insert_candidate(c)
                inserted += 1
            for c in failed:
                if c.fail_reason == "too_close":
                    self._skip_candidate(c, "too_close")
                else:
                    if self._fallback(c, round_no):
                        inserted += 1
            self.post_round()
            self.report.per_round.append({
                "round": round_no, "phase": phase,
                "candidates": len(pool), "accepted": len(accepted),
                "blasted": len(rejected), "failed": len(failed),
                "inserted": inserted,
                "pending_segments": len(self.enc_segs),
                "pending_faces": len(self.enc_faces),
                "workers": workers,
                "time": time.perf_counter() - tstart,
            })
            if cfg.verbose:
                r = self.report.per_round[-1]
                print("round {round} phase={phase} candidates={candidates} "
                      "accepted={accepted} blasted={blasted} "
                      "failed={failed} inserted={inserted} "
                      "workers={workers} time={time:.3f}".format(**r))
            round_no += 1
        rep = stats.analyze(self.mesh, cfg.B)
        rep.skipped = self.report.skipped
        rep.per_round = self.report.per_round
        rep.total_time = time.perf_counter() - t0
        return self.mesh, rep


def refine(plc, cfg: RefineConfig = None):
    """Refine a PLC into a conforming tetrahedral mesh with (almost all)
    tets of radius-edge ratio <= cfg.B."""
    if cfg is None:
        cfg = RefineConfig()
    return _Driver(plc, cfg).run()
