"""Mutable tetrahedral triangulation with ghost tets, Bowyer-Watson
point insertion, and constraint bookkeeping (subsegments / subfaces).

Storage is flat numpy arrays (vertices, tet vertex ids, packed neighbor
references) so batch kernels can operate on the same memory; this module
itself is the exact sequential reference path built on the filtered
predicates.

Conventions:
  - every alive real tet (v0,v1,v2,v3) is positively oriented
    (orient3d > 0);
  - the hull is closed by ghost tets (a,b,c,GHOST) whose first three
    vertices are the hull face oriented with the interior on its negative
    side;
  - face i of a tet is the face opposite vertex i, ordered by _FACES so
    its normal points out of the tet;
  - neighbor references are packed as 4*tet + face and are symmetric.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np

from .errors import (AllCoplanar, CavityNotStarShaped, DegenerateTet,
                     DuplicatePoint, TooClose)
from .geometry import circumsphere_tet
from .predicates import incircle3d, insphere, orient3d

try:
    from . import _kernels as _K
except ImportError:  # compiled path unavailable: reference path only
    _K = None

_ID_LIMIT = (1 << 21) - 2  # vertex ids packable into 21-bit key fields
_EMPTY_I64 = np.empty(0, dtype=np.int64)

GHOST = -1

_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))
_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# edge bit i of a tet flags _EDGES[i]

ElementRef = namedtuple("ElementRef", ["kind", "index"])
# kind: "tet" (index = tet id), "subsegment" (index = sorted vertex pair),
# "subface" (index = sorted vertex triple)

OUTSIDE = ElementRef("outside", -1)


class Region:
    """A Delaunay region: the cavity of a prospective insertion point."""

    __slots__ = ("point", "tets", "bfaces", "boundary_face_keys",
                 "crossed_subfaces", "enclosed_subsegments",
                 "boundary_subsegments", "boundary_subfaces",
                 "min_vertex_dist_sq", "_claim_keys")

    def __init__(self, point):
        self.point = point
        self.tets = []
        self.bfaces = []            # (cavity tet, face index) pairs
        self.boundary_face_keys = []
        self.crossed_subfaces = []  # subface keys interior to the cavity
        self.enclosed_subsegments = []  # subsegment keys losing all tets
        self.boundary_subsegments = []
        self.boundary_subfaces = []
        self.min_vertex_dist_sq = math.inf

    def element_refs(self):
        """Claim set: cavity tets, every boundary face, and every
        constraint element a retriangulation of this region could touch.
        Two regions sharing none of these can be inserted concurrently
        and the mesh stays globally Delaunay (a new tet's circumsphere
        is covered by the spheres of the two old tets at its base face,
        so a violation would force a shared tet or boundary face).
        """
        refs = [ElementRef("tet", t) for t in self.tets]
        for key in self.boundary_face_keys:
            refs.append(ElementRef("face", key))
        for key in self.boundary_subsegments:
            refs.append(ElementRef("subsegment", key))
        for key in self.enclosed_subsegments:
            refs.append(ElementRef("subsegment", key))
        for key in self.crossed_subfaces:
            refs.append(ElementRef("face", key))
        return refs


class Mesh:
    def __init__(self):
        self.points = np.empty((64, 3), dtype=np.float64)
        self._pt_cache = []  # per-vertex float tuples (fast predicate feed)
        self.vert_origin = np.empty(64, dtype=np.uint8)  # 0 input, 1 steiner
        self.vert_tet = np.full(64, -1, dtype=np.int64)
        self.nv = 0
        self.tv = np.empty((64, 4), dtype=np.int64)
        self.tn = np.full((64, 4), -1, dtype=np.int64)
        self.alive = np.zeros(64, dtype=np.uint8)
        self.sub_mask = np.zeros(64, dtype=np.uint8)
        self.seg_mask = np.zeros(64, dtype=np.uint8)
        self.ratio = np.zeros(64, dtype=np.float64)  # radius-edge; ghosts -1
        self.skip_flag = np.zeros(64, dtype=np.uint8)
        self.nt = 0
        self.subsegments = {}   # (u,v) sorted -> parent segment id
        self.subfaces = {}      # (a,b,c) sorted -> parent polygon id
        self._ac_cache = {}     # frozenset of face keys -> encoded array
        self.bbox_diag = 1.0
        self.too_close_sq = 0.0  # set once bbox_diag is known

    # -- storage ------------------------------------------------------------

    def _grow_verts(self):
        cap = self.points.shape[0]
        if self.nv < cap:
            return
        self.points = np.resize(self.points, (2 * cap, 3))
        self.vert_origin = np.resize(self.vert_origin, 2 * cap)
        self.vert_tet = np.resize(self.vert_tet, 2 * cap)

    def _grow_tets(self, need=1):
        cap = self.tv.shape[0]
        if self.nt + need <= cap:
            return
        newcap = cap
        while newcap < self.nt + need:
            newcap *= 2
        self.tv = np.resize(self.tv, (newcap, 4))
        self.tn = np.resize(self.tn, (newcap, 4))
        self.tn[cap:] = -1
        self.alive = np.resize(self.alive, newcap)
        self.alive[cap:] = 0
        self.sub_mask = np.resize(self.sub_mask, newcap)
        self.sub_mask[cap:] = 0
        self.seg_mask = np.resize(self.seg_mask, newcap)
        self.seg_mask[cap:] = 0
        self.ratio = np.resize(self.ratio, newcap)
        self.skip_flag = np.resize(self.skip_flag, newcap)
        self.skip_flag[cap:] = 0

    def add_vertex(self, p, origin=1) -> int:
        self._grow_verts()
        vid = self.nv
        self.points[vid] = p
        self._pt_cache.append((float(p[0]), float(p[1]), float(p[2])))
        self.vert_origin[vid] = origin
        self.vert_tet[vid] = -1
        self.nv += 1
        return vid

    def _new_tet(self, v0, v1, v2, v3) -> int:
        self._grow_tets()
        t = self.nt
        self.nt += 1
        self.tv[t, 0] = v0
        self.tv[t, 1] = v1
        self.tv[t, 2] = v2
        self.tv[t, 3] = v3
        self.tn[t] = -1
        self.alive[t] = 1
        self.sub_mask[t] = 0
        self.seg_mask[t] = 0
        self.skip_flag[t] = 0
        for v in (v0, v1, v2, v3):
            if v != GHOST:
                self.vert_tet[v] = t
        return t

    def point(self, vid):
        return self._pt_cache[vid]

    def is_ghost(self, t) -> bool:
        return self.tv[t, 3] == GHOST

    def tet_points(self, t):
        return tuple(self.point(v) for v in self.tv[t])

    def face_vertices(self, t, i):
        f = _FACES[i]
        return (self.tv[t, f[0]], self.tv[t, f[1]], self.tv[t, f[2]])

    def face_key(self, t, i):
        return tuple(sorted(int(v) for v in self.face_vertices(t, i)))

    def alive_tets(self):
        return [t for t in range(self.nt) if self.alive[t]]

    def real_tets(self):
        return [t for t in range(self.nt) if self.alive[t]
                and not self.is_ghost(t)]

    def n_real_tets(self) -> int:
        tv3 = self.tv[:self.nt, 3]
        return int(np.count_nonzero((self.alive[:self.nt] == 1)
                                    & (tv3 != GHOST)))

    def set_bbox(self, lo, hi):
        self.bbox_diag = math.dist(lo, hi)
        self.too_close_sq = 1e-24 * self.bbox_diag * self.bbox_diag

    # -- wiring -------------------------------------------------------------

    def _set_neighbors(self, t, i, u, j):
        self.tn[t, i] = 4 * u + j
        self.tn[u, j] = 4 * t + i

    def neighbor(self, t, i):
        packed = self.tn[t, i]
        return packed >> 2, packed & 3

    def _compute_ratio(self, t):
        if self.is_ghost(t):
            self.ratio[t] = -1.0
            return
        a, b, c, d = self.tet_points(t)
        try:
            sph = circumsphere_tet(a, b, c, d)
        except DegenerateTet:
            # exact-positive orientation but circumcenter beyond float
            # range: quality is effectively unbounded
            self.ratio[t] = math.inf
            return
        shortest = min(
            (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2,
            (a[0] - c[0]) ** 2 + (a[1] - c[1]) ** 2 + (a[2] - c[2]) ** 2,
            (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2 + (a[2] - d[2]) ** 2,
            (b[0] - c[0]) ** 2 + (b[1] - c[1]) ** 2 + (b[2] - c[2]) ** 2,
            (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2 + (b[2] - d[2]) ** 2,
            (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2 + (c[2] - d[2]) ** 2)
        self.ratio[t] = math.sqrt(sph.radius_sq / shortest)

    # -- queries ------------------------------------------------------------

    def tets_around_vertex(self, v):
        """All alive tets containing vertex v (BFS from vert_tet)."""
        start = int(self.vert_tet[v])
        if start < 0 or not self.alive[start] or v not in self.tv[start]:
            start = -1
            for t in range(self.nt):
                if self.alive[t] and v in self.tv[t]:
                    start = t
                    break
            if start < 0:
                return []
            self.vert_tet[v] = start
        out = [start]
        seen = {start}
        stack = [start]
        while stack:
            t = stack.pop()
            local = list(self.tv[t]).index(v)
            for i in range(4):
                if i == local:
                    continue
                u = int(self.tn[t, i]) >> 2
                if u >= 0 and u not in seen and self.alive[u]:
                    seen.add(u)
                    out.append(u)
                    stack.append(u)
        return out

    def edge_exists(self, u, v) -> bool:
        for t in self.tets_around_vertex(u):
            if v in self.tv[t]:
                return True
        return False

    def tets_around_edge(self, u, v):
        return [t for t in self.tets_around_vertex(u) if v in self.tv[t]]

    def find_tet_with_face(self, key):
        """An alive tet having the (sorted) vertex triple as a face, with
        its face index; (-1, -1) when the face is not in the mesh."""
        for t in self.tets_around_vertex(key[0]):
            tvs = [int(x) for x in self.tv[t]]
            if key[1] in tvs and key[2] in tvs:
                for i in range(4):
                    if self.face_key(t, i) == key:
                        return t, i
        return -1, -1

    def edge_link_vertices(self, u, v):
        """Vertices opposite the edge (u,v) in its incident tets (the ring
        around the edge), ghosts excluded."""
        out = set()
        for t in self.tets_around_edge(u, v):
            for w in self.tv[t]:
                w = int(w)
                if w not in (u, v, GHOST):
                    out.add(w)
        return out

    # -- location -----------------------------------------------------------

    def locate(self, p, hint=None):
        """Containing-tet query.  Returns ElementRef("tet", t) with t the
        lowest-index alive real tet containing p, or OUTSIDE."""
        t = self._walk(p, hint)
        if self.is_ghost(t):
            return OUTSIDE
        # resolve face/edge/vertex coincidence to the lowest incident index
        best = self._lowest_containing(p, t)
        return ElementRef("tet", best)

    def _hint_tet(self, hint):
        if hint is not None:
            if isinstance(hint, ElementRef):
                if hint.kind == "tet":
                    hint = hint.index
                else:
                    hint = None
        if hint is not None and 0 <= hint < self.nt and self.alive[hint] \
                and not self.is_ghost(hint):
            return int(hint)
        for t in range(self.nt):
            if self.alive[t] and not self.is_ghost(t):
                return t
        raise CavityNotStarShaped("mesh has no alive real tets")

    def _walk(self, p, hint=None):
        """Stochastic remembering walk; returns a real containing tet or a
        ghost tet whose outer halfspace contains p."""
        t = self._hint_tet(hint)
        if _K is not None and self.nv < _ID_LIMIT:
            status, tt = _K.walk_kernel(
                self.points, self.tv, self.tn,
                float(p[0]), float(p[1]), float(p[2]), t, self.nt)
            if status == _K.ST_OK:
                return int(tt)
        return self._walk_py(p, t)

    def _walk_py(self, p, t):
        max_steps = int(10 * max(1.0, self.nt) ** (1.0 / 3.0)) + 32
        step = 0
        prev = -1
        while step < max_steps:
            step += 1
            if self.is_ghost(t):
                return t
            moved = False
            for k in range(4):
                i = (k + step) & 3
                u = int(self.tn[t, i]) >> 2
                if u == prev:
                    continue
                fv = self.face_vertices(t, i)
                s = orient3d(self.point(fv[0]), self.point(fv[1]),
                             self.point(fv[2]), p)
                if s > 0:
                    prev = t
                    t = u
                    moved = True
                    break
            if not moved:
                return t
        # adversarial walk: fall back to an exhaustive scan
        for t in range(self.nt):
            if not self.alive[t] or self.is_ghost(t):
                continue
            if all(orient3d(*(self.point(v) for v in self.face_vertices(t, i)),
                            p) <= 0 for i in range(4)):
                return t
        # p is outside the hull: any ghost whose outer halfspace holds p
        for t in range(self.nt):
            if self.alive[t] and self.is_ghost(t):
                a, b, c = (self.point(self.tv[t, k]) for k in range(3))
                if orient3d(a, b, c, p) > 0:
                    return t
        raise CavityNotStarShaped("walk failed to locate point")

    def _lowest_containing(self, p, t):
        found = {t}
        stack = [t]
        while stack:
            cur = stack.pop()
            for i in range(4):
                fv = self.face_vertices(cur, i)
                s = orient3d(self.point(fv[0]), self.point(fv[1]),
                             self.point(fv[2]), p)
                if s == 0:
                    u = int(self.tn[cur, i]) >> 2
                    if u >= 0 and self.alive[u] and not self.is_ghost(u) \
                            and u not in found:
                        if all(orient3d(*(self.point(v) for v in
                                          self.face_vertices(u, j)), p) <= 0
                               for j in range(4)):
                            found.add(u)
                            stack.append(u)
        return min(found)

    # -- Delaunay regions ---------------------------------------------------

    def _in_region(self, t, p, allowed_cross=frozenset()) -> bool:
        if self.is_ghost(t):
            a = self.point(self.tv[t, 0])
            b = self.point(self.tv[t, 1])
            c = self.point(self.tv[t, 2])
            s = orient3d(a, b, c, p)
            if s > 0:
                return True
            if s == 0:
                return incircle3d(a, b, c, p) > 0
            # p is on the inner side of this hull face.  When the face is
            # a subface the caller intends to retile (a boundary split
            # point a rounding error below its own facet plane), the ghost
            # must die together with the subface, so membership follows
            # the facet's in-circle rule rather than visibility.
            if allowed_cross and self.face_key(t, 3) in allowed_cross:
                return incircle3d(a, b, c, p) > 0
            return False
        a, b, c, d = self.tet_points(t)
        return insphere(a, b, c, d, p) > 0

    def seed_tets(self, element: ElementRef):
        """Alive tets expected to belong to the Delaunay region of the
        element's splitting point, best guesses first."""
        if element.kind == "tet":
            return [int(element.index)]
        if element.kind == "subsegment":
            u, v = element.index
            ring = sorted(self.tets_around_edge(u, v))
            if not ring:
                raise CavityNotStarShaped("subsegment not an edge")
            return ring
        if element.kind == "subface":
            t, i = self.find_tet_with_face(tuple(element.index))
            if t < 0:
                raise CavityNotStarShaped("subface not a face")
            u = int(self.tn[t, i]) >> 2
            return sorted({t, u} if u >= 0 and self.alive[u] else {t})
        raise ValueError(f"bad element kind {element.kind}")

    def _encode_allowed(self, allowed):
        if not allowed:
            return _EMPTY_I64
        arr = self._ac_cache.get(allowed)
        if arr is None:
            arr = np.fromiter(
                (((a + 1) << 42) | ((b + 1) << 21) | (c + 1)
                 for (a, b, c) in allowed),
                dtype=np.int64, count=len(allowed))
            arr.sort()
            if len(self._ac_cache) > 8192:
                self._ac_cache.clear()
            self._ac_cache[allowed] = arr
        return arr

    def delaunay_region(self, p, seed, allowed_cross=frozenset()) -> Region:
        """Grow the connected region of elements that would become
        non-Delaunay if p were inserted, starting at seed (a tet id or an
        ElementRef).  Cavity growth never crosses a subface unless its key
        is in allowed_cross.  The returned region is shrunk so that
        starring p onto its boundary yields positively oriented tets."""
        if _K is None or self.nv >= _ID_LIMIT:
            return self._delaunay_region_py(p, seed, allowed_cross)
        if isinstance(seed, ElementRef):
            cands = self.seed_tets(seed)
        else:
            cands = [int(seed)]
        seeds = np.array(cands, dtype=np.int64)
        allowed_arr = self._encode_allowed(allowed_cross)
        ov = {}
        ovk = ovv = _EMPTY_I64
        walked = False
        p0, p1, p2 = float(p[0]), float(p[1]), float(p[2])
        while True:
            out = _K.region_kernel(
                self.points, self.tv, self.tn, self.alive,
                self.sub_mask, self.seg_mask,
                p0, p1, p2, seeds, allowed_arr, ovk, ovv)
            status = int(out[0])
            if status == _K.ST_OK:
                break
            if status == _K.ST_UNCERTAIN:
                # filter could not certify a sign: decide exactly, rerun
                key = int(out[1])
                t, code = key >> 3, key & 7
                if code == 7:
                    val = 1 if self._in_region(t, p, allowed_cross) else 0
                else:
                    a, b, c = (self.point(int(v))
                               for v in self.face_vertices(t, code))
                    val = orient3d(a, b, c, p)
                ov[key] = val
                items = sorted(ov.items())
                ovk = np.array([k for k, _ in items], dtype=np.int64)
                ovv = np.array([v for _, v in items], dtype=np.int64)
                continue
            if status == _K.ST_SEED_MISS:
                if walked:
                    raise CavityNotStarShaped("seed not in region")
                walked = True
                t = self._walk(p, cands[0] if cands else None)
                seeds = np.array([t], dtype=np.int64)
                continue
            if status == _K.ST_SEED_SHRUNK:
                raise CavityNotStarShaped("seed shrunk away")
            if status == _K.ST_MEMBRANE:
                packed = int(out[1])
                err = CavityNotStarShaped("constrained membrane face")
                err.membrane_keys = [self.face_key(packed >> 2, packed & 3)]
                raise err
            raise CavityNotStarShaped("cavity swallows a vertex")
        region = Region(p)
        region.tets = out[2].tolist()
        region.bfaces = [(pf >> 2, pf & 3) for pf in out[3].tolist()]
        region.boundary_face_keys = [tuple(row) for row in out[4].tolist()]
        for row, crossed in zip(out[5].tolist(), out[6].tolist()):
            (region.crossed_subfaces if crossed
             else region.boundary_subfaces).append(tuple(row))
        for row, bound in zip(out[7].tolist(), out[8].tolist()):
            (region.boundary_subsegments if bound
             else region.enclosed_subsegments).append(tuple(row))
        region.crossed_subfaces.sort()
        region.boundary_subfaces.sort()
        region.boundary_subsegments.sort()
        region.enclosed_subsegments.sort()
        region.min_vertex_dist_sq = float(out[9])
        return region

    def _delaunay_region_py(self, p, seed, allowed_cross=frozenset()):
        """Reference (pure Python) region computation."""
        if isinstance(seed, ElementRef):
            cands = self.seed_tets(seed)
        else:
            cands = [int(seed)]
        seed = -1
        for t in cands:
            if self.alive[t] and self._in_region(t, p, allowed_cross):
                seed = t
                break
        if seed < 0:
            # the listed seeds all miss (flat elements whose circumspheres
            # barely exclude the float splitting point): the containing
            # tet is always a member
            t = self._walk(p, cands[0] if cands else None)
            if self.alive[t] and self._in_region(t, p, allowed_cross):
                seed = t
            else:
                raise CavityNotStarShaped("seed not in region")
        cav = {seed}
        stack = [seed]
        while stack:
            t = stack.pop()
            for i in range(4):
                u = int(self.tn[t, i]) >> 2
                if u < 0 or u in cav or not self.alive[u]:
                    continue
                if self.sub_mask[t] & (1 << i) \
                        and self.face_key(t, i) not in allowed_cross:
                    continue
                if self._in_region(u, p, allowed_cross):
                    cav.add(u)
                    stack.append(u)
        while True:
            self._shrink_cavity(cav, p, seed, allowed_cross)
            comp = self._seed_component(cav, seed, allowed_cross)
            if len(comp) == len(cav):
                break
            cav = comp
        return self._finish_region(cav, p, allowed_cross)

    def _seed_component(self, cav, seed, allowed_cross):
        comp = {seed}
        stack = [seed]
        while stack:
            t = stack.pop()
            for i in range(4):
                u = int(self.tn[t, i]) >> 2
                if u not in cav or u in comp:
                    continue
                if self.sub_mask[t] & (1 << i) \
                        and self.face_key(t, i) not in allowed_cross:
                    continue
                comp.add(u)
                stack.append(u)
        return comp

    def _shrink_cavity(self, cav, p, seed, allowed_cross):
        """Remove cavity tets until every boundary face is visible from p
        (star-shape enforcement; also resolves constrained-membrane
        pinches)."""
        changed = True
        while changed:
            changed = False
            for t in list(cav):
                if t not in cav:
                    continue
                for i in range(4):
                    u = int(self.tn[t, i]) >> 2
                    blocked = bool(self.sub_mask[t] & (1 << i)) \
                        and self.face_key(t, i) not in allowed_cross
                    # interior faces need no check; membrane faces
                    # (blocked, both sides inside) are checked from both
                    # sides so exactly the invisible side is removed
                    if u in cav and not blocked:
                        continue
                    fv = self.face_vertices(t, i)
                    if GHOST in fv:
                        continue
                    # face of t oriented outward from t = toward survivor;
                    # the new tet is built on t's side, so p must be
                    # strictly on the *inner* side of this face
                    a, b, c = (self.point(v) for v in fv)
                    if orient3d(a, b, c, p) >= 0:
                        cav.discard(t)
                        changed = True
                        break
            if seed not in cav:
                raise CavityNotStarShaped("seed shrunk away")

    def _finish_region(self, cav, p, allowed_cross):
        region = Region(p)
        region.tets = sorted(cav)
        bverts = set()
        bedges = set()
        for t in region.tets:
            for i in range(4):
                u = int(self.tn[t, i]) >> 2
                blocked = bool(self.sub_mask[t] & (1 << i)) \
                    and self.face_key(t, i) not in allowed_cross
                if u in cav and not blocked:
                    continue
                if u in cav and blocked:
                    # membrane: both sides of a constraint face inside the
                    # cavity; inserting would destroy the subface, so the
                    # caller must split the subface first
                    err = CavityNotStarShaped("constrained membrane face")
                    err.membrane_keys = [self.face_key(t, i)]
                    raise err
                region.bfaces.append((t, i))
                region.boundary_face_keys.append(self.face_key(t, i))
                fv = [int(v) for v in self.face_vertices(t, i)]
                for v in fv:
                    if v != GHOST:
                        bverts.add(v)
                for a in range(3):
                    for b in range(a + 1, 3):
                        if fv[a] != GHOST and fv[b] != GHOST:
                            bedges.add((min(fv[a], fv[b]),
                                        max(fv[a], fv[b])))
        # classify constraint elements touched by the cavity
        seen_sub = set()
        seen_seg = set()
        for t in region.tets:
            sm = int(self.sub_mask[t])
            if sm:
                for i in range(4):
                    if sm & (1 << i):
                        key = self.face_key(t, i)
                        if key in seen_sub:
                            continue
                        seen_sub.add(key)
                        u = int(self.tn[t, i]) >> 2
                        if u in cav and key in allowed_cross:
                            region.crossed_subfaces.append(key)
                        else:
                            region.boundary_subfaces.append(key)
            em = int(self.seg_mask[t])
            if em:
                tvs = [int(v) for v in self.tv[t]]
                for i in range(6):
                    if em & (1 << i):
                        a, b = _EDGES[i]
                        key = (min(tvs[a], tvs[b]), max(tvs[a], tvs[b]))
                        if key in seen_seg:
                            continue
                        seen_seg.add(key)
                        if key in bedges:
                            region.boundary_subsegments.append(key)
                        else:
                            region.enclosed_subsegments.append(key)
        region.crossed_subfaces.sort()
        region.boundary_subfaces.sort()
        region.boundary_subsegments.sort()
        region.enclosed_subsegments.sort()
        for v in bverts:
            q = self.point(v)
            d = ((q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2
                 + (q[2] - p[2]) ** 2)
            if d < region.min_vertex_dist_sq:
                region.min_vertex_dist_sq = d
        # an interior cavity vertex would be disconnected by the
        # retriangulation; reject outright (cannot happen with exact
        # predicates on a Delaunay mesh)
        for t in region.tets:
            for v in self.tv[t]:
                v = int(v)
                if v != GHOST and v not in bverts:
                    raise CavityNotStarShaped("cavity swallows a vertex")
        return region

    # -- insertion ----------------------------------------------------------

    def insert_point(self, p, region: Region, origin=1, split_edge=None,
                     subface_removed=(), subface_added=(), vid=None) -> int:
        """Bowyer-Watson: delete the region's tets, star p onto its
        boundary.  split_edge names a subsegment key being split by p;
        subface_removed / subface_added carry the parent polygon's subface
        retiling (keys use the new vertex id -1 as a placeholder for p).
        vid names a pre-added vertex at p (bulk construction); otherwise a
        new vertex is appended."""
        if region.min_vertex_dist_sq <= self.too_close_sq:
            raise TooClose("insertion point coincides with a vertex")
        if vid is None:
            vid = self.add_vertex(p, origin)

        for t in region.tets:
            self.alive[t] = 0

        # subsegment bookkeeping
        vid_segs = []
        if split_edge is not None:
            u, v = split_edge
            parent = self.subsegments.pop(split_edge)
            vid_segs = [(min(u, vid), max(u, vid)),
                        (min(v, vid), max(v, vid))]
            for key in vid_segs:
                self.subsegments[key] = parent
        for key in subface_removed:
            del self.subfaces[key]
        added_keys = []
        for key, parent in subface_added:
            key = tuple(sorted(vid if k == -1 else k for k in key))
            self.subfaces[key] = parent
            added_keys.append(key)

        if _K is not None and self.nv < _ID_LIMIT:
            self._star_kernel(region, vid, added_keys, vid_segs)
        else:
            self._star_py(region, vid)
        return vid

    def _star_kernel(self, region, vid, added_keys, vid_segs):
        """Compiled starring.  A new tet's faces can only be subfaces if
        they are the old boundary face or were added this insertion, and
        its edges only subsegments along the boundary faces or the split
        children, so the constraint lookups reduce to small key arrays."""
        nbf = len(region.bfaces)
        self._grow_tets(need=nbf)
        sub_keys = set(added_keys)
        seg_keys = set(vid_segs)
        for key in region.boundary_face_keys:
            if key in self.subfaces:
                sub_keys.add(key)
            k0, k1, k2 = key
            for (a, b) in ((k0, k1), (k0, k2), (k1, k2)):
                if a != GHOST and (a, b) in self.subsegments:
                    seg_keys.add((a, b))
        sub_enc = np.fromiter(
            (((a + 1) << 42) | ((b + 1) << 21) | (c + 1)
             for (a, b, c) in sub_keys),
            dtype=np.int64, count=len(sub_keys))
        sub_enc.sort()
        seg_enc = np.fromiter(
            (((a + 1) << 21) | (b + 1) for (a, b) in seg_keys),
            dtype=np.int64, count=len(seg_keys))
        seg_enc.sort()
        bf_packed = np.fromiter((4 * t + i for (t, i) in region.bfaces),
                                dtype=np.int64, count=nbf)
        status, fall = _K.star_kernel(
            self.points, self.tv, self.tn, self.alive,
            self.sub_mask, self.seg_mask, self.ratio, self.skip_flag,
            self.vert_tet, self.nt, vid, bf_packed, sub_enc, seg_enc)
        self.nt += nbf
        if status != _K.ST_OK:
            raise CavityNotStarShaped("unmatched faces after starring")
        for t in fall:
            self._compute_ratio(int(t))

    def _star_py(self, region, vid):
        new_tets = []
        face_map = {}
        for (t, i) in region.bfaces:
            u, j = self.neighbor(t, i)
            # build from the survivor-side face orientation: the survivor's
            # outward face points into the cavity, so (face, p) is positive
            fv = [int(v) for v in self.face_vertices(u, j)]
            if GHOST in fv:
                # new ghost tet: hull edge reversed, then p, then GHOST
                real = [v for v in fv if v != GHOST]
                # directed real pair as it appears cyclically in fv
                k = fv.index(real[0])
                if fv[(k + 1) % 3] == real[1]:
                    e0, e1 = real[0], real[1]
                else:
                    e0, e1 = real[1], real[0]
                nt_ = self._new_tet(e1, e0, vid, GHOST)
            else:
                nt_ = self._new_tet(fv[0], fv[1], fv[2], vid)
            new_tets.append(nt_)
            # outer wiring: survivor u keeps face j
            self._set_neighbors(nt_, self._outer_face_index(nt_, t, i), u, j)
        # inner wiring: match remaining faces among the new tets
        for nt_ in new_tets:
            for i in range(4):
                if self.tn[nt_, i] >> 2 >= 0 and \
                        self.alive[self.tn[nt_, i] >> 2]:
                    continue
                key = self.face_key(nt_, i)
                if key in face_map:
                    ot, oi = face_map.pop(key)
                    self._set_neighbors(nt_, i, ot, oi)
                else:
                    face_map[key] = (nt_, i)
        if face_map:
            raise CavityNotStarShaped("unmatched faces after starring")

        # constraint masks and quality from the authoritative dicts
        for nt_ in new_tets:
            self._refresh_masks(nt_)
            self._compute_ratio(nt_)
        self.vert_tet[vid] = new_tets[0]
        return vid

    def _outer_face_index(self, nt_, t, i):
        """Index, within the new tet, of the face it shares with the
        survivor across the old boundary face (t, i)."""
        key = self.face_key(t, i)
        for k in range(4):
            if self.face_key(nt_, k) == key:
                return k
        raise CavityNotStarShaped("outer face not found on new tet")

    def _refresh_masks(self, t):
        sm = 0
        for i in range(4):
            if self.face_key(t, i) in self.subfaces:
                sm |= 1 << i
        self.sub_mask[t] = sm
        em = 0
        tvs = [int(v) for v in self.tv[t]]
        for i, (a, b) in enumerate(_EDGES):
            va, vb = tvs[a], tvs[b]
            if va != GHOST and vb != GHOST and \
                    (min(va, vb), max(va, vb)) in self.subsegments:
                em |= 1 << i
        self.seg_mask[t] = em

    def refresh_all_masks(self):
        for t in range(self.nt):
            if self.alive[t]:
                self._refresh_masks(t)

    def compact(self):
        """Drop dead tet slots, renumbering alive tets in order.  Element
        references by tet id are invalidated; vertex-keyed references
        (subsegments, subfaces) are unaffected."""
        old = np.flatnonzero(self.alive[:self.nt] == 1)
        remap = np.full(self.nt, -1, dtype=np.int64)
        remap[old] = np.arange(len(old))
        self.tv[:len(old)] = self.tv[old]
        tn = self.tn[old]
        self.tn[:len(old)] = remap[tn >> 2] * 4 + (tn & 3)
        self.sub_mask[:len(old)] = self.sub_mask[old]
        self.seg_mask[:len(old)] = self.seg_mask[old]
        self.ratio[:len(old)] = self.ratio[old]
        self.skip_flag[:len(old)] = self.skip_flag[old]
        self.alive[:len(old)] = 1
        self.alive[len(old):self.nt] = 0
        self.nt = len(old)
        vt = self.vert_tet[:self.nv]
        self.vert_tet[:self.nv] = np.where(vt >= 0, remap[vt], -1)

    # -- construction -------------------------------------------------------

    @classmethod
    def init_delaunay(cls, points, shuffle_seed=0):
        """Delaunay tetrahedralization of the given points by randomized
        incremental insertion.  Vertex ids equal input point indices."""
        pts = [tuple(float(c) for c in q) for q in points]
        if len(set(pts)) != len(pts):
            raise DuplicatePoint("duplicate input points")
        if len(pts) < 4:
            raise AllCoplanar("need at least 4 points")
        order = list(range(len(pts)))
        rng = np.random.default_rng(shuffle_seed)
        rng.shuffle(order)

        mesh = cls()
        lo = tuple(min(q[k] for q in pts) for k in range(3))
        hi = tuple(max(q[k] for q in pts) for k in range(3))
        mesh.set_bbox(lo, hi)
        for q in pts:
            mesh.add_vertex(q, origin=0)

        # first four affinely independent points in shuffled order
        first = [order[0]]
        for idx in order[1:]:
            cand = first + [idx]
            n = len(cand)
            ok = False
            if n == 2:
                ok = pts[cand[0]] != pts[cand[1]]
            elif n == 3:
                ok = not _collinear(pts[cand[0]], pts[cand[1]], pts[cand[2]])
            else:
                ok = orient3d(pts[cand[0]], pts[cand[1]], pts[cand[2]],
                              pts[cand[3]]) != 0
            if ok:
                first.append(idx)
            if len(first) == 4:
                break
        if len(first) < 4:
            raise AllCoplanar("no four non-coplanar points")

        a, b, c, d = first
        if orient3d(pts[a], pts[b], pts[c], pts[d]) < 0:
            a, b = b, a
        t0 = mesh._new_tet(a, b, c, d)
        ghosts = []
        for i in range(4):
            fv = mesh.face_vertices(t0, i)
            # ghost hull face keeps the outward orientation of face i
            g = mesh._new_tet(int(fv[0]), int(fv[1]), int(fv[2]), GHOST)
            ghosts.append(g)
            mesh._set_neighbors(t0, i, g, 3)
        # wire ghost side faces to each other by face key
        fmap = {}
        for g in ghosts:
            for i in range(3):
                key = mesh.face_key(g, i)
                if key in fmap:
                    ot, oi = fmap.pop(key)
                    mesh._set_neighbors(g, i, ot, oi)
                else:
                    fmap[key] = (g, i)
        assert not fmap
        mesh._compute_ratio(t0)

        hint = t0
        done = set(first)
        for idx in order:
            if idx in done:
                continue
            p = pts[idx]
            seed = mesh._walk(p, hint)
            region = mesh.delaunay_region(p, seed)
            mesh.insert_point(p, region, origin=0, vid=idx)
            hint = int(mesh.vert_tet[idx])
        return mesh

    # -- audits -------------------------------------------------------------

    def audit(self, check_delaunay=False):
        """Full structural audit; raises AssertionError on violation."""
        for t in range(self.nt):
            if not self.alive[t]:
                continue
            tvs = [int(v) for v in self.tv[t]]
            if GHOST in tvs:
                assert tvs[3] == GHOST, f"ghost not in slot 3 of {t}"
                assert tvs.count(GHOST) == 1
            else:
                assert orient3d(*(self.point(v) for v in tvs)) > 0, \
                    f"tet {t} not positively oriented"
            for i in range(4):
                packed = int(self.tn[t, i])
                assert packed >= 0, f"unset neighbor {t}:{i}"
                u, j = packed >> 2, packed & 3
                assert self.alive[u], f"dead neighbor {u} of {t}"
                assert int(self.tn[u, j]) == 4 * t + i, \
                    f"asymmetric link {t}:{i} <-> {u}:{j}"
                assert self.face_key(t, i) == self.face_key(u, j), \
                    f"face mismatch {t}:{i} vs {u}:{j}"
        # every face shared by exactly two alive tets
        counts = {}
        for t in range(self.nt):
            if not self.alive[t]:
                continue
            for i in range(4):
                counts[self.face_key(t, i)] = \
                    counts.get(self.face_key(t, i), 0) + 1
        for key, cnt in counts.items():
            assert cnt == 2, f"face {key} shared by {cnt} tets"
        # constraint masks agree with the dicts
        for t in range(self.nt):
            if not self.alive[t]:
                continue
            for i in range(4):
                has = self.face_key(t, i) in self.subfaces
                assert bool(self.sub_mask[t] & (1 << i)) == has, \
                    f"sub_mask stale on {t}:{i}"
        # every subsegment / subface is present in the mesh
        for (u, v) in self.subsegments:
            assert self.edge_exists(u, v), f"subsegment {(u, v)} missing"
        for key in self.subfaces:
            assert counts.get(tuple(key), 0) == 2, f"subface {key} missing"
        if check_delaunay:
            assert self.delaunay_ok(), "empty-circumsphere violation"

    def delaunay_ok(self) -> bool:
        """Brute-force global empty-circumsphere check (real tets against
        all vertices); O(n_tets * n_verts)."""
        for t in range(self.nt):
            if not self.alive[t] or self.is_ghost(t):
                continue
            a, b, c, d = self.tet_points(t)
            tvs = set(int(v) for v in self.tv[t])
            for v in range(self.nv):
                if v in tvs:
                    continue
                if insphere(a, b, c, d, self.point(v)) > 0:
                    return False
        return True


def _collinear(a, b, c) -> bool:
    for axis in range(3):
        i, j = [k for k in range(3) if k != axis]
        from .predicates import orient2d
        if orient2d((a[i], a[j]), (b[i], b[j]), (c[i], c[j])) != 0:
            return False
    return True
