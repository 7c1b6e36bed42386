"""Per-polygon planar Delaunay triangulations.

Each input polygon carries its own 2D Delaunay triangulation of the mesh
vertices lying on it (corners, boundary-segment split points, in-facet
Steiner points).  The triangles classified inside the polygon are the
polygon's subfaces; the complex reports the subface set changes caused by
each point insertion so the tetrahedral mesh's subface table stays in
sync.

Projection drops the coordinate axis where the polygon's normal is
largest, so 2D coordinates are exact copies of 3D coordinates and the
filtered 2D predicates decide exactly.  A subface with an empty equatorial
ball is an edge/face of every Delaunay triangulation (Gabriel property),
so once no subsegment or subface is encroached the 2D triangulations and
the 3D mesh agree on the boundary.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import CavityNotStarShaped, DegenerateTri
from .geometry import circumcircle_tri
from .plc import _point_in_polygon_2d, _proj_axis
from .predicates import incircle2d, orient2d

GHOST2 = -1


class Tri2D:
    """Incremental 2D Delaunay triangulation over externally supplied
    vertex ids; the hull is closed by ghost triangles (a, b, GHOST2) whose
    directed edge a->b is a hull edge with the interior on its left."""

    def __init__(self):
        self.pos = {}        # vid -> (x, y)
        self.tris = {}       # tid -> (a, b, c) counterclockwise
        self.half = {}       # directed edge (a, b) -> tid
        self.next_tid = 0
        self._last = -1      # walk hint

    def _add_tri(self, a, b, c):
        tid = self.next_tid
        self.next_tid += 1
        self.tris[tid] = (a, b, c)
        self.half[(a, b)] = tid
        self.half[(b, c)] = tid
        self.half[(c, a)] = tid
        return tid

    def _remove_tri(self, tid):
        a, b, c = self.tris.pop(tid)
        for e in ((a, b), (b, c), (c, a)):
            if self.half.get(e) == tid:
                del self.half[e]

    def bootstrap(self, vids, coords):
        """Initialize from the first three non-collinear vertices of the
        given sequence; remaining vertices are inserted normally."""
        pending = []
        base = []
        for vid, q in zip(vids, coords):
            self.pos[vid] = q
            if len(base) < 3:
                cand = base + [vid]
                ok = True
                if len(cand) == 2:
                    ok = self.pos[cand[0]] != self.pos[cand[1]]
                elif len(cand) == 3:
                    ok = orient2d(self.pos[cand[0]], self.pos[cand[1]],
                                  self.pos[cand[2]]) != 0
                if ok:
                    base.append(vid)
                else:
                    pending.append(vid)
                if len(base) == 3:
                    a, b, c = base
                    if orient2d(self.pos[a], self.pos[b], self.pos[c]) < 0:
                        a, b = b, a
                    self._add_tri(a, b, c)
                    self._add_tri(b, a, GHOST2)
                    self._add_tri(c, b, GHOST2)
                    self._add_tri(a, c, GHOST2)
                    self._last = 0
            else:
                pending.append(vid)
        if len(base) < 3:
            raise DegenerateTri("all facet vertices collinear")
        for vid in pending:
            self.insert(vid, self.pos[vid])

    def _in_tri_region(self, tid, p):
        a, b, c = self.tris[tid]
        if c == GHOST2:
            pa, pb = self.pos[a], self.pos[b]
            s = orient2d(pa, pb, p)
            if s != 0:
                return s > 0
            # p on the hull edge's line: member iff strictly between a, b
            d0 = sum((Fraction(p[k]) - Fraction(pa[k]))
                     * (Fraction(pb[k]) - Fraction(pa[k])) for k in range(2))
            dl = sum((Fraction(pb[k]) - Fraction(pa[k])) ** 2
                     for k in range(2))
            return 0 < d0 < dl
        return incircle2d(self.pos[a], self.pos[b], self.pos[c], p) > 0

    def _find_seed(self, p):
        # walk from the last touched triangle; facet triangulations are
        # small enough that the exhaustive fallback is acceptable
        tid = self._last if self._last in self.tris else next(iter(self.tris))
        for _ in range(4 * len(self.tris) + 16):
            tri = self.tris[tid]
            if GHOST2 in tri:
                break
            a, b, c = tri
            moved = False
            for (u, v) in ((a, b), (b, c), (c, a)):
                if orient2d(self.pos[u], self.pos[v], p) < 0:
                    tid = self.half[(v, u)]
                    moved = True
                    break
            if not moved:
                break
        if self._in_tri_region(tid, p):
            return tid
        for tid in self.tris:
            if self._in_tri_region(tid, p):
                return tid
        raise CavityNotStarShaped("2D point in no triangle's region")

    def _cavity(self, p):
        seed = self._find_seed(p)
        cav = {seed}
        stack = [seed]
        while stack:
            tid = stack.pop()
            a, b, c = self.tris[tid]
            for e in ((b, a), (c, b), (a, c)):
                nb = self.half.get(e)
                if nb is not None and nb not in cav \
                        and self._in_tri_region(nb, p):
                    cav.add(nb)
                    stack.append(nb)
        return cav

    def cavity_triangles(self, p):
        """The triangles a point inserted at p would delete (read-only)."""
        return [self.tris[tid] for tid in self._cavity(p)]

    def _expand_star(self, cav, p):
        """Grow a cavity until starring p onto its rim yields positively
        oriented triangles (the forced part of an induced cavity need not
        be star-shaped from p on its own)."""
        changed = True
        while changed:
            changed = False
            for tid in list(cav):
                a, b, c = self.tris[tid]
                for (u, v) in ((a, b), (b, c), (c, a)):
                    nb = self.half.get((v, u))
                    if nb is None or nb in cav:
                        continue
                    if GHOST2 in (u, v):
                        continue
                    if orient2d(self.pos[u], self.pos[v], p) <= 0:
                        cav.add(nb)
                        changed = True
            if len(cav) == len(self.tris):
                raise CavityNotStarShaped("2D cavity expansion consumed "
                                          "the whole triangulation")

    def _component(self, cav, seed):
        comp = {seed}
        stack = [seed]
        while stack:
            tid = stack.pop()
            a, b, c = self.tris[tid]
            for (u, v) in ((b, a), (c, b), (a, c)):
                nb = self.half.get((u, v))
                if nb is not None and nb in cav and nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
        return comp

    def insert(self, vid, p, forced=()):
        """Insert vertex vid at 2D position p; returns (removed, added)
        triangle vertex tuples.  forced lists triangle ids that must be
        part of the cavity (their 3D counterparts are already gone); the
        Delaunay cavity of p is unioned in and the result expanded until
        star-shaped."""
        self.pos[vid] = p
        if forced:
            cav = set(forced)
            seed = None
            try:
                own = self._cavity(p)
                seed = next(iter(own))
                cav |= own
            except CavityNotStarShaped:
                pass
            self._expand_star(cav, p)
            # the 3D cavity's trace on the plane can be disconnected;
            # star only the hole that contains p, the rest heals through
            # the presence/encroachment rescan
            cav = self._component(cav, seed if seed is not None
                                  else min(cav))
        else:
            cav = self._cavity(p)
        removed = [self.tris[tid] for tid in cav]
        # boundary: directed edges of cavity triangles whose mate is
        # outside; star vid onto them
        bedges = []
        for tid in cav:
            a, b, c = self.tris[tid]
            for e in ((a, b), (b, c), (c, a)):
                if self.half.get((e[1], e[0])) not in cav:
                    bedges.append(e)
        for tid in cav:
            self._remove_tri(tid)
        added = []
        for (u, v) in bedges:
            if GHOST2 in (u, v):
                # side edge of a dying ghost: the new ghost triangle must
                # contain the boundary edge in the same direction so it
                # pairs with the surviving ghost's reversed edge
                if u == GHOST2:
                    tid = self._add_tri(v, vid, GHOST2)
                    added.append((v, vid, GHOST2))
                else:
                    tid = self._add_tri(vid, u, GHOST2)
                    added.append((vid, u, GHOST2))
            else:
                tid = self._add_tri(u, v, vid)
                added.append((u, v, vid))
            self._last = tid
        return removed, added

    def audit(self):
        for tid, (a, b, c) in self.tris.items():
            for e in ((a, b), (b, c), (c, a)):
                assert self.half.get(e) == tid, f"half-edge {e} broken"
                assert (e[1], e[0]) in self.half, f"unpaired edge {e}"
            if GHOST2 not in (a, b, c):
                assert orient2d(self.pos[a], self.pos[b], self.pos[c]) > 0
        # global Delaunay: no vertex strictly inside any circumcircle
        for tid, (a, b, c) in self.tris.items():
            if GHOST2 in (a, b, c):
                continue
            for v, q in self.pos.items():
                if v in (a, b, c):
                    continue
                assert incircle2d(self.pos[a], self.pos[b], self.pos[c],
                                  q) <= 0, "2D Delaunay violation"


class Facet:
    """One input polygon with its planar triangulation and subface set."""

    def __init__(self, pid, corner_ids, corner_points):
        self.pid = pid
        self.corner_ids = list(corner_ids)
        frac = [tuple(Fraction(c) for c in q) for q in corner_points]
        self.axis = _proj_axis(frac)
        i, j = [k for k in range(3) if k != self.axis]
        # order the kept axes so the projected boundary is counterclockwise
        if _poly_area_sign([(q[i], q[j]) for q in frac]) < 0:
            i, j = j, i
        self.keep = (i, j)
        self.poly2d = [(float(q[i]), float(q[j])) for q in frac]
        self.tri = Tri2D()
        self.tri.bootstrap(self.corner_ids,
                           [self.project(q) for q in corner_points])
        self._inside_cache = {}

    def project(self, p3):
        return (p3[self.keep[0]], p3[self.keep[1]])

    def _tri_inside(self, tri):
        """Is this triangulation triangle inside the polygon?  Decided by
        an exact point-in-polygon test on the centroid."""
        if GHOST2 in tri:
            return False
        key = tuple(sorted(tri))
        hit = self._inside_cache.get(key)
        if hit is None:
            pts = [self.tri.pos[v] for v in tri]
            cx = sum(Fraction(q[0]) for q in pts) / 3
            cy = sum(Fraction(q[1]) for q in pts) / 3
            hit = _point_in_polygon_2d(self.poly2d, (cx, cy))
            self._inside_cache[key] = hit
        return hit

    def subface_keys(self):
        return {tuple(sorted(tri)) for tri in self.tri.tris.values()
                if self._tri_inside(tri)}

    def insert(self, vid, p3, crossed=(), split_edge=None):
        """Insert a mesh vertex lying on this polygon.  crossed lists
        subface keys the 3D cavity destroyed; they are forced into the 2D
        cavity so the triangulation follows the mesh.  split_edge names a
        triangulation edge the vertex subdivides; both its triangles are
        forced so the edge is retired (the float point lies a rounding
        error off the edge, which would otherwise leave a degenerate
        sliver on it).  Returns (removed_keys, added_keys)."""
        forced = []
        if crossed:
            kmap = {tuple(sorted(t)): tid for tid, t in self.tri.tris.items()
                    if GHOST2 not in t}
            forced = [kmap[k] for k in sorted(crossed) if k in kmap]
        if split_edge is not None:
            u, v = split_edge
            for e in ((u, v), (v, u)):
                tid = self.tri.half.get(e)
                if tid is not None:
                    forced.append(tid)
        removed, added = self.tri.insert(vid, self.project(p3), forced)
        rem = {tuple(sorted(t)) for t in removed if self._tri_inside(t)}
        add = {tuple(sorted(t)) for t in added if self._tri_inside(t)}
        return rem, add


def _poly_area_sign(pts2):
    """Sign of twice the signed area of the closed polygon (exact when
    given Fraction coordinates)."""
    total = 0
    n = len(pts2)
    for k in range(n):
        x0, y0 = pts2[k]
        x1, y1 = pts2[(k + 1) % n]
        total += x0 * y1 - x1 * y0
    if total > 0:
        return 1
    if total < 0:
        return -1
    return 0


class FacetComplex:
    """All facets of a PLC plus the segment-to-polygon incidence needed to
    propagate boundary splits."""

    def __init__(self, plc):
        self.facets = {}
        seg_index = {}
        for sid, (u, v) in enumerate(plc.segments):
            seg_index[(min(u, v), max(u, v))] = sid
        self.segment_polygons = {sid: [] for sid in range(len(plc.segments))}
        self.keys_by_pid = {}
        # which boundary-segment lines each vertex lies on; a triangle
        # whose three vertices share a line is a degenerate sliver the
        # float split points can produce and must never become a subface
        self.vert_sids = {}
        for sid, (u, v) in enumerate(plc.segments):
            self.vert_sids.setdefault(u, set()).add(sid)
            self.vert_sids.setdefault(v, set()).add(sid)
        for pid, poly in enumerate(plc.polygons):
            self.facets[pid] = Facet(pid, poly,
                                     [plc.points[v] for v in poly])
            self.keys_by_pid[pid] = self.facets[pid].subface_keys()
            n = len(poly)
            for k in range(n):
                a, b = poly[k], poly[(k + 1) % n]
                sid = seg_index[(min(a, b), max(a, b))]
                self.segment_polygons[sid].append(pid)

    def initial_subfaces(self):
        """(key, pid) pairs for every subface of every facet."""
        out = []
        for pid in self.facets:
            for key in sorted(self.keys_by_pid[pid]):
                out.append((key, pid))
        return out

    def polygons_of_segment(self, sid):
        return self.segment_polygons.get(sid, [])

    def _collinear_sliver(self, key):
        sids = None
        for v in key:
            s = self.vert_sids.get(v)
            if not s:
                return False
            sids = set(s) if sids is None else sids & s
            if not sids:
                return False
        return True

    def _apply(self, pid, vid, p3, crossed, split_edge=None):
        rem, add = self.facets[pid].insert(vid, p3, crossed, split_edge)
        rem &= self.keys_by_pid[pid]
        add = {k for k in add if not self._collinear_sliver(k)}
        self.keys_by_pid[pid] -= rem
        self.keys_by_pid[pid] |= add
        return rem, add

    def split_segment(self, sid, edge, vid, p3, crossed_by_pid=None):
        """Propagate a boundary-segment split point into every polygon
        bordered by that segment.  edge is the subsegment's vertex pair;
        crossed_by_pid maps each polygon to the subface keys the 3D cavity
        destroyed there.  Returns (removed, added_with_pid)."""
        removed = []
        added = []
        self.vert_sids.setdefault(vid, set()).add(sid)
        for pid in self.polygons_of_segment(sid):
            crossed = () if crossed_by_pid is None \
                else crossed_by_pid.get(pid, ())
            rem, add = self._apply(pid, vid, p3, crossed, edge)
            removed.extend(sorted(rem))
            added.extend((key, pid) for key in sorted(add))
        # a triple of split points on the shared segment line could in
        # principle appear in two facets; never remove or add a key twice
        removed = list(dict.fromkeys(removed))
        seen = set()
        added = [ka for ka in added
                 if not (ka[0] in seen or seen.add(ka[0]))]
        return removed, added

    def split_facet(self, pid, vid, p3, crossed=()):
        rem, add = self._apply(pid, vid, p3, crossed)
        return sorted(rem), [(key, pid) for key in sorted(add)]

    def subface_steiner(self, key, mesh):
        """Splitting point of a subface: its circumcenter, computed from
        the 3D vertex coordinates."""
        a, b, c = (mesh.point(v) for v in key)
        return circumcircle_tri(a, b, c).center
