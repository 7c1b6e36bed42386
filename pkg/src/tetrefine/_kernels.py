"""Compiled (numba) kernels for the triangulation hot path.

These mirror the pure-Python reference implementations in mesh.py
step for step.  Every predicate is evaluated with the same float filter
as predicates.py; whenever a filter cannot certify a sign, the kernel
stops and reports which decision it needs, the caller resolves it with
the exact rational predicates and re-runs with the answer supplied as an
override.  The kernels therefore make exactly the decisions the exact
reference path would, at float speed on the generic cases.

Vertex ids are packed three (or two) to an int64 in 21-bit fields
(value + 1, so the ghost id -1 maps to 0); callers must keep the vertex
count below 2**21 - 2 or use the reference path.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict

# filter constants, derived exactly as in predicates.py
_every_other = True
_epsilon = 1.0
_splitter = 1.0
_check = 1.0
while True:
    _lastcheck = _check
    _epsilon *= 0.5
    if _every_other:
        _splitter *= 2.0
    _every_other = not _every_other
    _check = 1.0 + _epsilon
    if _check == 1.0 or _check == _lastcheck:
        break
_splitter += 1.0

_CCW_BOUND = (3.0 + 16.0 * _epsilon) * _epsilon
_ICC_BOUND = (10.0 + 96.0 * _epsilon) * _epsilon
_O3D_BOUND = (7.0 + 56.0 * _epsilon) * _epsilon
_ISP_BOUND = (16.0 + 224.0 * _epsilon) * _epsilon

_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]],
                  dtype=np.int64)
_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]],
                  dtype=np.int64)

# region_kernel / walk_kernel statuses
ST_OK = 0
ST_UNCERTAIN = 1      # aux = override key (8*tet + face, or 8*tet + 7)
ST_SEED_MISS = 2
ST_SEED_SHRUNK = 3
ST_MEMBRANE = 4       # aux = 4*tet + face
ST_SWALLOW = 5
ST_EXHAUSTED = 6      # walk only
ST_BAD_STAR = 7       # star only

GHOST = -1


@njit(cache=True, inline="always")
def _enc2(a, b):
    if a > b:
        a, b = b, a
    return ((a + 1) << 21) | (b + 1)


@njit(cache=True, inline="always")
def _enc3(a, b, c):
    if a > b:
        a, b = b, a
    if b > c:
        b, c = c, b
    if a > b:
        a, b = b, a
    return ((a + 1) << 42) | ((b + 1) << 21) | (c + 1)


@njit(cache=True, inline="always")
def _find(arr, key):
    lo = 0
    hi = arr.size
    while lo < hi:
        mid = (lo + hi) >> 1
        v = arr[mid]
        if v < key:
            lo = mid + 1
        elif v > key:
            hi = mid
        else:
            return mid
    return -1


# ---------------------------------------------------------------------------
# filtered predicates (sign, certain); sign conventions match predicates.py

@njit(cache=True, inline="always")
def _o2d(ax, ay, bx, by, cx, cy):
    detleft = (bx - ax) * (cy - ay)
    detright = (by - ay) * (cx - ax)
    det = detleft - detright
    detsum = abs(detleft) + abs(detright)
    if abs(det) > _CCW_BOUND * detsum:
        return (1 if det > 0.0 else -1), True
    return 0, False


@njit(cache=True, inline="always")
def _icc2(ax, ay, bx, by, cx, cy, dx, dy):
    adx = ax - dx
    ady = ay - dy
    bdx = bx - dx
    bdy = by - dy
    cdx = cx - dx
    cdy = cy - dy
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    bxcy = bdx * cdy
    bycx = bdy * cdx
    cxay = cdx * ady
    cyax = cdy * adx
    axby = adx * bdy
    aybx = ady * bdx
    det = alift * (bxcy - bycx) + blift * (cxay - cyax) \
        + clift * (axby - aybx)
    permanent = (alift * (abs(bxcy) + abs(bycx))
                 + blift * (abs(cxay) + abs(cyax))
                 + clift * (abs(axby) + abs(aybx)))
    if abs(det) > _ICC_BOUND * permanent:
        return (1 if det > 0.0 else -1), True
    return 0, False


@njit(cache=True, inline="always")
def _o3d(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    adx = ax - dx
    ady = ay - dy
    adz = az - dz
    bdx = bx - dx
    bdy = by - dy
    bdz = bz - dz
    cdx = cx - dx
    cdy = cy - dy
    cdz = cz - dz
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    cdxady = cdx * ady
    adxcdy = adx * cdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    det = (adz * (bdxcdy - cdxbdy)
           + bdz * (cdxady - adxcdy)
           + cdz * (adxbdy - bdxady))
    permanent = (abs(adz) * (abs(bdxcdy) + abs(cdxbdy))
                 + abs(bdz) * (abs(cdxady) + abs(adxcdy))
                 + abs(cdz) * (abs(adxbdy) + abs(bdxady)))
    if abs(det) > _O3D_BOUND * permanent:
        return (-1 if det > 0.0 else 1), True
    return 0, False


@njit(cache=True, inline="always")
def _isp(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz, ex, ey, ez):
    aex = ax - ex
    aey = ay - ey
    aez = az - ez
    bex = bx - ex
    bey = by - ey
    bez = bz - ez
    cex = cx - ex
    cey = cy - ey
    cez = cz - ez
    dex = dx - ex
    dey = dy - ey
    dez = dz - ez

    aexbey = aex * bey
    bexaey = bex * aey
    ab = aexbey - bexaey
    bexcey = bex * cey
    cexbey = cex * bey
    bc = bexcey - cexbey
    cexdey = cex * dey
    dexcey = dex * cey
    cd = cexdey - dexcey
    dexaey = dex * aey
    aexdey = aex * dey
    da = dexaey - aexdey
    aexcey = aex * cey
    cexaey = cex * aey
    ac = aexcey - cexaey
    bexdey = bex * dey
    dexbey = dex * bey
    bd = bexdey - dexbey

    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da

    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez

    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)

    aezplus = abs(aez)
    bezplus = abs(bez)
    cezplus = abs(cez)
    dezplus = abs(dez)
    aexbeyplus = abs(aexbey)
    bexaeyplus = abs(bexaey)
    bexceyplus = abs(bexcey)
    cexbeyplus = abs(cexbey)
    cexdeyplus = abs(cexdey)
    dexceyplus = abs(dexcey)
    dexaeyplus = abs(dexaey)
    aexdeyplus = abs(aexdey)
    aexceyplus = abs(aexcey)
    cexaeyplus = abs(cexaey)
    bexdeyplus = abs(bexdey)
    dexbeyplus = abs(dexbey)
    permanent = (((cexdeyplus + dexceyplus) * bezplus
                  + (dexbeyplus + bexdeyplus) * cezplus
                  + (bexceyplus + cexbeyplus) * dezplus) * alift
                 + ((dexaeyplus + aexdeyplus) * cezplus
                    + (aexceyplus + cexaeyplus) * dezplus
                    + (cexdeyplus + dexceyplus) * aezplus) * blift
                 + ((aexbeyplus + bexaeyplus) * dezplus
                    + (bexaeyplus + aexbeyplus) * aezplus
                    + (dexaeyplus + aexdeyplus) * bezplus) * clift
                 + ((bexceyplus + cexbeyplus) * aezplus
                    + (cexaeyplus + aexceyplus) * bezplus
                    + (aexbeyplus + bexaeyplus) * cezplus) * dlift)
    if abs(det) > _ISP_BOUND * permanent:
        return (-1 if det > 0.0 else 1), True
    return 0, False


@njit(cache=True)
def _inc3(ax, ay, az, bx, by, bz, cx, cy, cz, px, py, pz):
    """incircle3d: project along the dominant normal axis with an
    orientation correction; uncertain whenever any sub-filter is."""
    ux = bx - ax
    uy = by - ay
    uz = bz - az
    vx = cx - ax
    vy = cy - ay
    vz = cz - az
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    anx = abs(nx)
    any_ = abs(ny)
    anz = abs(nz)
    # axes in decreasing |n| order (stable, matching sorted() with -abs key)
    if anx >= any_ and anx >= anz:
        a0 = 0
        if any_ >= anz:
            a1, a2 = 1, 2
        else:
            a1, a2 = 2, 1
    elif any_ > anx and any_ >= anz:
        a0 = 1
        if anx >= anz:
            a1, a2 = 0, 2
        else:
            a1, a2 = 2, 0
    else:
        a0 = 2
        if anx >= any_:
            a1, a2 = 0, 1
        else:
            a1, a2 = 1, 0
    pa = (ax, ay, az)
    pb = (bx, by, bz)
    pc = (cx, cy, cz)
    pp = (px, py, pz)
    for axis in (a0, a1, a2):
        if axis == 0:
            i, j = 1, 2
        elif axis == 1:
            i, j = 0, 2
        else:
            i, j = 0, 1
        s, cert = _o2d(pa[i], pa[j], pb[i], pb[j], pc[i], pc[j])
        if not cert:
            return 0, False
        if s != 0:
            r, cert = _icc2(pa[i], pa[j], pb[i], pb[j], pc[i], pc[j],
                            pp[i], pp[j])
            if not cert:
                return 0, False
            return s * r, True
    return 0, False  # degenerate triangle: defer to the reference path


# ---------------------------------------------------------------------------
# membership test (mirrors Mesh._in_region)

@njit(cache=True)
def _member(points, tv, px, py, pz, t, allowed, ov_keys, ov_vals):
    """(in_region, certain) for tet t against insertion point p."""
    oi = _find(ov_keys, t * 8 + 7)
    if oi >= 0:
        return ov_vals[oi] != 0, True
    v0 = tv[t, 0]
    v1 = tv[t, 1]
    v2 = tv[t, 2]
    v3 = tv[t, 3]
    ax = points[v0, 0]
    ay = points[v0, 1]
    az = points[v0, 2]
    bx = points[v1, 0]
    by = points[v1, 1]
    bz = points[v1, 2]
    cx = points[v2, 0]
    cy = points[v2, 1]
    cz = points[v2, 2]
    if v3 == GHOST:
        s, cert = _o3d(ax, ay, az, bx, by, bz, cx, cy, cz, px, py, pz)
        if not cert:
            return False, False
        if s > 0:
            return True, True
        if s < 0:
            if allowed.size == 0:
                return False, True
            if _find(allowed, _enc3(v0, v1, v2)) < 0:
                return False, True
        r, cert = _inc3(ax, ay, az, bx, by, bz, cx, cy, cz, px, py, pz)
        if not cert:
            return False, False
        return r > 0, True
    dx = points[v3, 0]
    dy = points[v3, 1]
    dz = points[v3, 2]
    s, cert = _isp(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz,
                   px, py, pz)
    if not cert:
        return False, False
    return s > 0, True


@njit(cache=True, inline="always")
def _face_verts(tv, t, i):
    return (tv[t, _FACES[i, 0]], tv[t, _FACES[i, 1]], tv[t, _FACES[i, 2]])


# ---------------------------------------------------------------------------
# point location walk (mirrors Mesh._walk up to its fallback scans)

@njit(cache=True)
def walk_kernel(points, tv, tn, px, py, pz, t0, nt):
    t = t0
    max_steps = int(10.0 * max(1.0, float(nt)) ** (1.0 / 3.0)) + 32
    step = 0
    prev = -1
    while step < max_steps:
        step += 1
        if tv[t, 3] == GHOST:
            return ST_OK, t
        moved = False
        for k in range(4):
            i = (k + step) & 3
            u = tn[t, i] >> 2
            if u == prev:
                continue
            f0, f1, f2 = _face_verts(tv, t, i)
            s, cert = _o3d(points[f0, 0], points[f0, 1], points[f0, 2],
                           points[f1, 0], points[f1, 1], points[f1, 2],
                           points[f2, 0], points[f2, 1], points[f2, 2],
                           px, py, pz)
            if not cert:
                return ST_UNCERTAIN, t
            if s > 0:
                prev = t
                t = u
                moved = True
                break
        if not moved:
            return ST_OK, t
    return ST_EXHAUSTED, t


# ---------------------------------------------------------------------------
# full region computation (grow + shrink + component + finish)

@njit(cache=True)
def region_kernel(points, tv, tn, alive, sub_mask, seg_mask,
                  px, py, pz, seeds, allowed, ov_keys, ov_vals):
    e1 = np.empty(0, np.int64)
    e3 = np.empty((0, 3), np.int64)
    e2 = np.empty((0, 2), np.int64)
    eu = np.empty(0, np.uint8)

    # seed selection
    seed = -1
    for si in range(seeds.size):
        t = seeds[si]
        if t < 0 or alive[t] == 0:
            continue
        m, cert = _member(points, tv, px, py, pz, t, allowed,
                          ov_keys, ov_vals)
        if not cert:
            return (ST_UNCERTAIN, t * 8 + 7, e1, e1, e3, e3, eu, e2, eu, 0.0)
        if m:
            seed = t
            break
    if seed < 0:
        return (ST_SEED_MISS, 0, e1, e1, e3, e3, eu, e2, eu, 0.0)

    # grow
    cav = Dict.empty(types.int64, types.int64)
    cav[seed] = 1
    stack = np.empty(64, np.int64)
    stack[0] = seed
    sp = 1
    while sp > 0:
        sp -= 1
        t = stack[sp]
        for i in range(4):
            u = tn[t, i] >> 2
            if u < 0 or u in cav or alive[u] == 0:
                continue
            if sub_mask[t] & (1 << i):
                f0, f1, f2 = _face_verts(tv, t, i)
                if _find(allowed, _enc3(f0, f1, f2)) < 0:
                    continue
            m, cert = _member(points, tv, px, py, pz, u, allowed,
                              ov_keys, ov_vals)
            if not cert:
                return (ST_UNCERTAIN, u * 8 + 7,
                        e1, e1, e3, e3, eu, e2, eu, 0.0)
            if m:
                cav[u] = 1
                if sp >= stack.size:
                    ns = np.empty(2 * stack.size, np.int64)
                    ns[:stack.size] = stack
                    stack = ns
                stack[sp] = u
                sp += 1

    # shrink to a star-shaped set, keep the seed's component, repeat
    while True:
        changed = True
        while changed:
            changed = False
            n = len(cav)
            snap = np.empty(n, np.int64)
            idx = 0
            for k in cav:
                snap[idx] = k
                idx += 1
            for ii in range(n):
                t = snap[ii]
                if t not in cav:
                    continue
                for i in range(4):
                    u = tn[t, i] >> 2
                    blocked = False
                    if sub_mask[t] & (1 << i):
                        f0, f1, f2 = _face_verts(tv, t, i)
                        blocked = _find(allowed, _enc3(f0, f1, f2)) < 0
                    if u in cav and not blocked:
                        continue
                    f0, f1, f2 = _face_verts(tv, t, i)
                    if f0 == GHOST or f1 == GHOST or f2 == GHOST:
                        continue
                    okey = t * 8 + i
                    oi = _find(ov_keys, okey)
                    if oi >= 0:
                        s = ov_vals[oi]
                    else:
                        s, cert = _o3d(
                            points[f0, 0], points[f0, 1], points[f0, 2],
                            points[f1, 0], points[f1, 1], points[f1, 2],
                            points[f2, 0], points[f2, 1], points[f2, 2],
                            px, py, pz)
                        if not cert:
                            return (ST_UNCERTAIN, okey,
                                    e1, e1, e3, e3, eu, e2, eu, 0.0)
                    if s >= 0:
                        del cav[t]
                        changed = True
                        break
            if seed not in cav:
                return (ST_SEED_SHRUNK, 0, e1, e1, e3, e3, eu, e2, eu, 0.0)
        comp = Dict.empty(types.int64, types.int64)
        comp[seed] = 1
        sp = 1
        stack[0] = seed
        while sp > 0:
            sp -= 1
            t = stack[sp]
            for i in range(4):
                u = tn[t, i] >> 2
                if u not in cav or u in comp:
                    continue
                if sub_mask[t] & (1 << i):
                    f0, f1, f2 = _face_verts(tv, t, i)
                    if _find(allowed, _enc3(f0, f1, f2)) < 0:
                        continue
                comp[u] = 1
                if sp >= stack.size:
                    ns = np.empty(2 * stack.size, np.int64)
                    ns[:stack.size] = stack
                    stack = ns
                stack[sp] = u
                sp += 1
        if len(comp) == len(cav):
            break
        cav = comp

    # finish: boundary faces, constraint classification, min distance
    n = len(cav)
    cavarr = np.empty(n, np.int64)
    idx = 0
    for k in cav:
        cavarr[idx] = k
        idx += 1
    cavarr.sort()

    nbf = 0
    bf = np.empty(4 * n, np.int64)
    bfkeys = np.empty((4 * n, 3), np.int64)
    bverts = Dict.empty(types.int64, types.int64)
    bedges = Dict.empty(types.int64, types.int64)
    nsf = 0
    sf = np.empty((4 * n, 3), np.int64)
    sf_cross = np.empty(4 * n, np.uint8)
    seen_sub = Dict.empty(types.int64, types.int64)
    nsg = 0
    sg = np.empty((6 * n, 2), np.int64)
    sg_bound = np.empty(6 * n, np.uint8)
    seen_seg = Dict.empty(types.int64, types.int64)

    for ii in range(n):
        t = cavarr[ii]
        for i in range(4):
            u = tn[t, i] >> 2
            blocked = False
            if sub_mask[t] & (1 << i):
                f0, f1, f2 = _face_verts(tv, t, i)
                blocked = _find(allowed, _enc3(f0, f1, f2)) < 0
            if u in cav and not blocked:
                continue
            if u in cav and blocked:
                return (ST_MEMBRANE, t * 4 + i,
                        e1, e1, e3, e3, eu, e2, eu, 0.0)
            f0, f1, f2 = _face_verts(tv, t, i)
            bf[nbf] = t * 4 + i
            # sorted triple (ghost -1 sorts first, as in face_key)
            a, b, c = f0, f1, f2
            if a > b:
                a, b = b, a
            if b > c:
                b, c = c, b
            if a > b:
                a, b = b, a
            bfkeys[nbf, 0] = a
            bfkeys[nbf, 1] = b
            bfkeys[nbf, 2] = c
            nbf += 1
            if f0 != GHOST:
                bverts[f0] = 1
            if f1 != GHOST:
                bverts[f1] = 1
            if f2 != GHOST:
                bverts[f2] = 1
            if f0 != GHOST and f1 != GHOST:
                bedges[_enc2(f0, f1)] = 1
            if f0 != GHOST and f2 != GHOST:
                bedges[_enc2(f0, f2)] = 1
            if f1 != GHOST and f2 != GHOST:
                bedges[_enc2(f1, f2)] = 1
        sm = sub_mask[t]
        if sm:
            for i in range(4):
                if sm & (1 << i):
                    f0, f1, f2 = _face_verts(tv, t, i)
                    key = _enc3(f0, f1, f2)
                    if key in seen_sub:
                        continue
                    seen_sub[key] = 1
                    u = tn[t, i] >> 2
                    crossed = (u in cav) and _find(allowed, key) >= 0
                    a, b, c = f0, f1, f2
                    if a > b:
                        a, b = b, a
                    if b > c:
                        b, c = c, b
                    if a > b:
                        a, b = b, a
                    sf[nsf, 0] = a
                    sf[nsf, 1] = b
                    sf[nsf, 2] = c
                    sf_cross[nsf] = 1 if crossed else 0
                    nsf += 1
        em = seg_mask[t]
        if em:
            for i in range(6):
                if em & (1 << i):
                    a = tv[t, _EDGES[i, 0]]
                    b = tv[t, _EDGES[i, 1]]
                    key = _enc2(a, b)
                    if key in seen_seg:
                        continue
                    seen_seg[key] = 1
                    if a > b:
                        a, b = b, a
                    sg[nsg, 0] = a
                    sg[nsg, 1] = b
                    sg_bound[nsg] = 1 if key in bedges else 0
                    nsg += 1

    mind = np.inf
    for v in bverts:
        d = ((points[v, 0] - px) ** 2 + (points[v, 1] - py) ** 2
             + (points[v, 2] - pz) ** 2)
        if d < mind:
            mind = d
    for ii in range(n):
        t = cavarr[ii]
        for k in range(4):
            v = tv[t, k]
            if v != GHOST and v not in bverts:
                return (ST_SWALLOW, 0, e1, e1, e3, e3, eu, e2, eu, 0.0)

    return (ST_OK, 0, cavarr, bf[:nbf].copy(), bfkeys[:nbf].copy(),
            sf[:nsf].copy(), sf_cross[:nsf].copy(), sg[:nsg].copy(),
            sg_bound[:nsg].copy(), mind)


# ---------------------------------------------------------------------------
# insertion starring (mirrors the core of Mesh.insert_point)

@njit(cache=True)
def star_kernel(points, tv, tn, alive, sub_mask, seg_mask, ratio, skip_flag,
                vert_tet, nt0, vid, bf_packed, sub_enc, seg_enc):
    """Create one new tet per boundary face, wire neighbors, set constraint
    masks and quality ratios.  Returns (status, tets needing the exact
    ratio fallback)."""
    nbf = bf_packed.size
    fall = np.empty(nbf, np.int64)
    nfall = 0

    for k in range(nbf):
        pf = bf_packed[k]
        t = pf >> 2
        i = pf & 3
        packed = tn[t, i]
        u = packed >> 2
        j = packed & 3
        f0, f1, f2 = _face_verts(tv, u, j)
        nt_ = nt0 + k
        if f0 == GHOST or f1 == GHOST or f2 == GHOST:
            # hull side face: real edge reversed, then the new vertex,
            # then the ghost
            if f0 == GHOST:
                e0, e1 = f1, f2
            elif f1 == GHOST:
                e0, e1 = f2, f0
            else:
                e0, e1 = f0, f1
            tv[nt_, 0] = e1
            tv[nt_, 1] = e0
            tv[nt_, 2] = vid
            tv[nt_, 3] = GHOST
        else:
            tv[nt_, 0] = f0
            tv[nt_, 1] = f1
            tv[nt_, 2] = f2
            tv[nt_, 3] = vid
        for m in range(4):
            tn[nt_, m] = -1
            v = tv[nt_, m]
            if v != GHOST:
                vert_tet[v] = nt_
        alive[nt_] = 1
        sub_mask[nt_] = 0
        seg_mask[nt_] = 0
        skip_flag[nt_] = 0
        # outer wiring: the new tet's face matching the old boundary face
        key = _enc3(f0, f1, f2)
        outer = -1
        for m in range(4):
            g0, g1, g2 = _face_verts(tv, nt_, m)
            if _enc3(g0, g1, g2) == key:
                outer = m
                break
        if outer < 0:
            return ST_BAD_STAR, fall[:0]
        tn[nt_, outer] = 4 * u + j
        tn[u, j] = 4 * nt_ + outer

    # inner wiring among the new tets
    fmap = Dict.empty(types.int64, types.int64)
    for k in range(nbf):
        nt_ = nt0 + k
        for i in range(4):
            pk = tn[nt_, i]
            if pk >= 0 and alive[pk >> 2] == 1:
                continue
            g0, g1, g2 = _face_verts(tv, nt_, i)
            key = _enc3(g0, g1, g2)
            if key in fmap:
                other = fmap[key]
                del fmap[key]
                ot = other >> 2
                oi = other & 3
                tn[nt_, i] = other
                tn[ot, oi] = 4 * nt_ + i
            else:
                fmap[key] = 4 * nt_ + i
    if len(fmap) > 0:
        return ST_BAD_STAR, fall[:0]

    # constraint masks and quality
    for k in range(nbf):
        nt_ = nt0 + k
        sm = 0
        if sub_enc.size:
            for i in range(4):
                g0, g1, g2 = _face_verts(tv, nt_, i)
                if g0 != GHOST and g1 != GHOST and g2 != GHOST and \
                        _find(sub_enc, _enc3(g0, g1, g2)) >= 0:
                    sm |= 1 << i
        sub_mask[nt_] = sm
        em = 0
        if seg_enc.size:
            for i in range(6):
                a = tv[nt_, _EDGES[i, 0]]
                b = tv[nt_, _EDGES[i, 1]]
                if a != GHOST and b != GHOST and \
                        _find(seg_enc, _enc2(a, b)) >= 0:
                    em |= 1 << i
        seg_mask[nt_] = em
        if tv[nt_, 3] == GHOST:
            ratio[nt_] = -1.0
            continue
        a0 = tv[nt_, 0]
        a1 = tv[nt_, 1]
        a2 = tv[nt_, 2]
        a3 = tv[nt_, 3]
        ax = points[a0, 0]
        ay = points[a0, 1]
        az = points[a0, 2]
        ux = points[a1, 0] - ax
        uy = points[a1, 1] - ay
        uz = points[a1, 2] - az
        vx = points[a2, 0] - ax
        vy = points[a2, 1] - ay
        vz = points[a2, 2] - az
        wx = points[a3, 0] - ax
        wy = points[a3, 1] - ay
        wz = points[a3, 2] - az
        vwx = vy * wz - vz * wy
        vwy = vz * wx - vx * wz
        vwz = vx * wy - vy * wx
        denom = 2.0 * (ux * vwx + uy * vwy + uz * vwz)
        if denom == 0.0 or not np.isfinite(denom):
            ratio[nt_] = np.inf
            fall[nfall] = nt_
            nfall += 1
            continue
        lu = ux * ux + uy * uy + uz * uz
        lv = vx * vx + vy * vy + vz * vz
        lw = wx * wx + wy * wy + wz * wz
        wux = wy * uz - wz * uy
        wuy = wz * ux - wx * uz
        wuz = wx * uy - wy * ux
        uvx = uy * vz - uz * vy
        uvy = uz * vx - ux * vz
        uvz = ux * vy - uy * vx
        ox = (lu * vwx + lv * wux + lw * uvx) / denom
        oy = (lu * vwy + lv * wuy + lw * uvy) / denom
        oz = (lu * vwz + lv * wuz + lw * uvz) / denom
        r2 = ox * ox + oy * oy + oz * oz
        shortest = lu
        if lv < shortest:
            shortest = lv
        if lw < shortest:
            shortest = lw
        bx = points[a1, 0]
        by = points[a1, 1]
        bz = points[a1, 2]
        d2 = ((points[a2, 0] - bx) ** 2 + (points[a2, 1] - by) ** 2
              + (points[a2, 2] - bz) ** 2)
        if d2 < shortest:
            shortest = d2
        d2 = ((points[a3, 0] - bx) ** 2 + (points[a3, 1] - by) ** 2
              + (points[a3, 2] - bz) ** 2)
        if d2 < shortest:
            shortest = d2
        d2 = ((points[a3, 0] - points[a2, 0]) ** 2
              + (points[a3, 1] - points[a2, 1]) ** 2
              + (points[a3, 2] - points[a2, 2]) ** 2)
        if d2 < shortest:
            shortest = d2
        ratio[nt_] = np.sqrt(r2 / shortest)

    vert_tet[vid] = nt0
    return ST_OK, fall[:nfall]
