"""Exact-decision geometric predicates.

Each predicate evaluates a floating-point determinant together with a
forward error bound (Shewchuk-style static filter).  When the magnitude of
the determinant does not exceed the bound, the sign is recomputed in exact
rational arithmetic, so the returned sign is always the sign an
unbounded-precision evaluation would produce.
"""

from __future__ import annotations

import math

# Machine-epsilon derived filter constants, computed the same way
# predicates.c does at startup.
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


def _sign(x) -> int:
    if x > 0:
        return 1
    if x < 0:
        return -1
    return 0


# ---------------------------------------------------------------------------
# exact evaluation: floats are scaled to integers over a common power of
# two (exactly, via frexp), and the determinants are computed in unbounded
# integer arithmetic.  The common positive scale factor leaves every
# determinant sign unchanged because each determinant is homogeneous in
# the coordinates.

_M53 = 1 << 53


def _scaled_ints(coords):
    ms = []
    es = []
    for x in coords:
        m, e = math.frexp(x)
        ms.append(int(m * _M53))
        es.append(e)
    emin = min(es)
    return [mi << (e - emin) for mi, e in zip(ms, es)]


def _orient2d_exact(a, b, c) -> int:
    ax, ay, bx, by, cx, cy = _scaled_ints(
        (a[0], a[1], b[0], b[1], c[0], c[1]))
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return _sign(det)


def _incircle2d_exact(a, b, c, d) -> int:
    ax_, ay_, bx_, by_, cx_, cy_, dx, dy = _scaled_ints(
        (a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]))
    rows = []
    for px, py in ((ax_ - dx, ay_ - dy), (bx_ - dx, by_ - dy),
                   (cx_ - dx, cy_ - dy)):
        rows.append((px, py, px * px + py * py))
    (ax, ay, al), (bx, by, bl), (cx, cy, cl) = rows
    det = (ax * (by * cl - bl * cy)
           - ay * (bx * cl - bl * cx)
           + al * (bx * cy - by * cx))
    return _sign(det)


def _orient3d_exact(a, b, c, d) -> int:
    (ax, ay, az, bx, by, bz,
     cx, cy, cz, dx, dy, dz) = _scaled_ints(
        (a[0], a[1], a[2], b[0], b[1], b[2],
         c[0], c[1], c[2], d[0], d[1], d[2]))
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    wx, wy, wz = dx - ax, dy - ay, dz - az
    det = (ux * (vy * wz - vz * wy)
           - uy * (vx * wz - vz * wx)
           + uz * (vx * wy - vy * wx))
    return _sign(det)


def _insphere_exact(a, b, c, d, e) -> int:
    vals = _scaled_ints(
        (a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2],
         d[0], d[1], d[2], e[0], e[1], e[2]))
    ex, ey, ez = vals[12], vals[13], vals[14]
    rows = []
    for k in range(4):
        px = vals[3 * k] - ex
        py = vals[3 * k + 1] - ey
        pz = vals[3 * k + 2] - ez
        rows.append((px, py, pz, px * px + py * py + pz * pz))

    def det3(r0, r1, r2, i, j, k):
        return (r0[i] * (r1[j] * r2[k] - r1[k] * r2[j])
                - r0[j] * (r1[i] * r2[k] - r1[k] * r2[i])
                + r0[k] * (r1[i] * r2[j] - r1[j] * r2[i]))

    r0, r1, r2, r3 = rows
    det = (-r0[3] * det3(r1, r2, r3, 0, 1, 2)
           + r1[3] * det3(r0, r2, r3, 0, 1, 2)
           - r2[3] * det3(r0, r1, r3, 0, 1, 2)
           + r3[3] * det3(r0, r1, r2, 0, 1, 2))
    # sign flip: the row layout above yields a positive determinant for a
    # *negatively* oriented (a,b,c,d) with e inside; we require the positive
    # orientation convention of orient3d.
    return -_sign(det)


# ---------------------------------------------------------------------------
# filtered predicates

def orient2d(a, b, c) -> int:
    """Sign of the signed area of triangle abc (+1 = counterclockwise)."""
    detleft = (b[0] - a[0]) * (c[1] - a[1])
    detright = (b[1] - a[1]) * (c[0] - a[0])
    det = detleft - detright
    detsum = abs(detleft) + abs(detright)
    if abs(det) > _CCW_BOUND * detsum:
        return _sign(det)
    return _orient2d_exact(a, b, c)


def incircle2d(a, b, c, d) -> int:
    """+1 iff d is strictly inside the circumcircle of ccw triangle abc."""
    adx = a[0] - d[0]
    ady = a[1] - d[1]
    bdx = b[0] - d[0]
    bdy = b[1] - d[1]
    cdx = c[0] - d[0]
    cdy = c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    bxcy = bdx * cdy
    bycx = bdy * cdx
    cxay = cdx * ady
    cyax = cdy * adx
    axby = adx * bdy
    aybx = ady * bdx
    det = alift * (bxcy - bycx) + blift * (cxay - cyax) + clift * (axby - aybx)
    permanent = (alift * (abs(bxcy) + abs(bycx))
                 + blift * (abs(cxay) + abs(cyax))
                 + clift * (abs(axby) + abs(aybx)))
    if abs(det) > _ICC_BOUND * permanent:
        return _sign(det)
    return _incircle2d_exact(a, b, c, d)


def orient3d(a, b, c, d) -> int:
    """Side of plane(a,b,c) that d lies on.

    +1 when (a,b,c,d) is positively oriented (the canonical frame
    (0,0,0),(1,0,0),(0,1,0),(0,0,1) is positive), -1 for the mirror
    orientation, 0 when the four points are coplanar.
    """
    adx = a[0] - d[0]
    ady = a[1] - d[1]
    adz = a[2] - d[2]
    bdx = b[0] - d[0]
    bdy = b[1] - d[1]
    bdz = b[2] - d[2]
    cdx = c[0] - d[0]
    cdy = c[1] - d[1]
    cdz = c[2] - d[2]
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
        return -_sign(det)
    return _orient3d_exact(a, b, c, d)


def insphere(a, b, c, d, e) -> int:
    """+1 iff e is strictly inside the circumsphere of tet (a,b,c,d).

    The tetrahedron must be positively oriented (orient3d(a,b,c,d) > 0);
    the caller normalizes.  Returns 0 when e lies exactly on the sphere,
    -1 when strictly outside.
    """
    aex = a[0] - e[0]
    aey = a[1] - e[1]
    aez = a[2] - e[2]
    bex = b[0] - e[0]
    bey = b[1] - e[1]
    bez = b[2] - e[2]
    cex = c[0] - e[0]
    cey = c[1] - e[1]
    cez = c[2] - e[2]
    dex = d[0] - e[0]
    dey = d[1] - e[1]
    dez = d[2] - e[2]

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
        return -_sign(det)
    return _insphere_exact(a, b, c, d, e)


def incircle3d(a, b, c, p) -> int:
    """+1 iff p (coplanar with a,b,c) is strictly inside circumcircle(a,b,c).

    Decided by projecting onto the coordinate plane where the triangle's
    normal has its largest component, with an orientation correction so the
    answer is independent of the projection.
    """
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    nx = uy * vz - uz * vy
    ny = uz * vx - ux * vz
    nz = ux * vy - uy * vx
    order = sorted(range(3), key=lambda k: -abs((nx, ny, nz)[k]))
    for axis in order:
        i, j = [k for k in range(3) if k != axis]
        a2 = (a[i], a[j])
        b2 = (b[i], b[j])
        c2 = (c[i], c[j])
        p2 = (p[i], p[j])
        s = orient2d(a2, b2, c2)
        if s != 0:
            return s * incircle2d(a2, b2, c2, p2)
    raise ValueError("degenerate triangle in incircle3d")
