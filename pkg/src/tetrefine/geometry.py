"""Constructive geometric primitives: circumcenters, quality ratios,
encroachment tests, dihedral angles.

Constructions are plain floating point (no exactness contract); the
strict in/out decisions (encroachment) go through the filtered predicates
so boundary cases are decided exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DegenerateTet, DegenerateTri
from .predicates import orient3d


@dataclass(frozen=True)
class Sphere:
    """A sphere stored as center plus squared radius (avoids square roots)."""

    center: tuple
    radius_sq: float


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _cross(u, v):
    return (u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0])


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _dist_sq(a, b):
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    return dx * dx + dy * dy + dz * dz


def circumsphere_tet(a, b, c, d) -> Sphere:
    """Circumsphere of tetrahedron (a,b,c,d); raises DegenerateTet on
    coplanar input."""
    u = _sub(b, a)
    v = _sub(c, a)
    w = _sub(d, a)
    denom = 2.0 * _dot(u, _cross(v, w))
    if denom == 0.0 or not math.isfinite(denom):
        if orient3d(a, b, c, d) == 0:
            raise DegenerateTet("coplanar vertices")
        # near-flat tet whose float determinant cancels: fall back to the
        # exact rational solve (the center is far but well defined)
        return _circumsphere_tet_exact(a, b, c, d)
    lu = _dot(u, u)
    lv = _dot(v, v)
    lw = _dot(w, w)
    vw = _cross(v, w)
    wu = _cross(w, u)
    uv = _cross(u, v)
    ox = (lu * vw[0] + lv * wu[0] + lw * uv[0]) / denom
    oy = (lu * vw[1] + lv * wu[1] + lw * uv[1]) / denom
    oz = (lu * vw[2] + lv * wu[2] + lw * uv[2]) / denom
    center = (a[0] + ox, a[1] + oy, a[2] + oz)
    return Sphere(center, ox * ox + oy * oy + oz * oz)


def _circumsphere_tet_exact(a, b, c, d) -> Sphere:
    af = tuple(Fraction(t) for t in a)
    u = tuple(Fraction(b[k]) - af[k] for k in range(3))
    v = tuple(Fraction(c[k]) - af[k] for k in range(3))
    w = tuple(Fraction(d[k]) - af[k] for k in range(3))
    vw = (v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2],
          v[0] * w[1] - v[1] * w[0])
    wu = (w[1] * u[2] - w[2] * u[1], w[2] * u[0] - w[0] * u[2],
          w[0] * u[1] - w[1] * u[0])
    uv = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
          u[0] * v[1] - u[1] * v[0])
    denom = 2 * sum(u[k] * vw[k] for k in range(3))
    lu = sum(t * t for t in u)
    lv = sum(t * t for t in v)
    lw = sum(t * t for t in w)
    off = tuple((lu * vw[k] + lv * wu[k] + lw * uv[k]) / denom
                for k in range(3))
    try:
        center = tuple(float(af[k] + off[k]) for k in range(3))
        r2 = float(sum(t * t for t in off))
    except OverflowError:
        raise DegenerateTet("circumcenter overflows float range")
    if not all(math.isfinite(t) for t in center) or not math.isfinite(r2):
        raise DegenerateTet("circumcenter overflows float range")
    return Sphere(center, r2)


def circumcircle_tri(a, b, c) -> Sphere:
    """Equatorial sphere of triangle (a,b,c): the smallest sphere whose
    equator is the triangle's circumcircle.  Center lies in the triangle's
    plane.  Raises DegenerateTri on collinear input."""
    u = _sub(b, a)
    v = _sub(c, a)
    n = _cross(u, v)
    nn = _dot(n, n)
    if nn == 0.0:
        raise DegenerateTri("collinear vertices")
    lu = _dot(u, u)
    lv = _dot(v, v)
    t = _cross(_sub((lu * v[0], lu * v[1], lu * v[2]),
                    (lv * u[0], lv * u[1], lv * u[2])), n)
    ox = t[0] / (2.0 * nn)
    oy = t[1] / (2.0 * nn)
    oz = t[2] / (2.0 * nn)
    # cross(lu*v - lv*u, n)/(2 nn) gives the in-plane offset from a
    center = (a[0] + ox, a[1] + oy, a[2] + oz)
    return Sphere(center, ox * ox + oy * oy + oz * oz)


def radius_edge_ratio(a, b, c, d) -> float:
    """Circumradius divided by shortest edge length; >= sqrt(6)/4 for any
    non-degenerate tet, with the regular tet as minimizer."""
    sphere = circumsphere_tet(a, b, c, d)
    shortest_sq = min(_dist_sq(a, b), _dist_sq(a, c), _dist_sq(a, d),
                      _dist_sq(b, c), _dist_sq(b, d), _dist_sq(c, d))
    return math.sqrt(sphere.radius_sq / shortest_sq)


def encroaches_segment(seg, p) -> bool:
    """True iff p is strictly inside the open diametral ball of seg.

    Decided exactly: with midpoint m of (u,v), p encroaches iff
    |p-m|^2 < |u-m|^2, evaluated in rational arithmetic when the floating
    comparison is too close to call.
    """
    u, v = seg
    # 4|p-m|^2 - 4r^2 = |2p-u-v|^2 - |u-v|^2, exact in rationals
    f = 0.0
    ssq = 0.0
    for k in range(3):
        t = 2.0 * p[k] - u[k] - v[k]
        e = u[k] - v[k]
        f += t * t - e * e
        ssq += t * t + e * e
    # forward error of the float expression is far below 1e-12 * magnitude
    if abs(f) > 1e-12 * ssq:
        return f < 0.0
    total = Fraction(0)
    for k in range(3):
        t = 2 * Fraction(p[k]) - Fraction(u[k]) - Fraction(v[k])
        e = Fraction(u[k]) - Fraction(v[k])
        total += t * t - e * e
    return total < 0


def _equatorial_cmp(tri, p):
    """Sign of |p-o|^2 - r^2 for the equatorial sphere of tri, exact."""
    a, b, c = tri
    sph = circumcircle_tri(a, b, c)  # degenerate check
    o = sph.center
    f = _dist_sq(p, o) - sph.radius_sq
    scale = _dist_sq(p, o) + sph.radius_sq
    if abs(f) > 1e-9 * scale:
        return 1 if f > 0 else -1
    # exact: solve the circumcenter from the linear system in rationals
    af = tuple(Fraction(t) for t in a)
    bf = tuple(Fraction(t) for t in b)
    cf = tuple(Fraction(t) for t in c)
    pf = tuple(Fraction(t) for t in p)
    u = tuple(bf[k] - af[k] for k in range(3))
    v = tuple(cf[k] - af[k] for k in range(3))
    n = (u[1] * v[2] - u[2] * v[1],
         u[2] * v[0] - u[0] * v[2],
         u[0] * v[1] - u[1] * v[0])
    # center = a + x*u + y*v with 2(x u + y v).u = |u|^2 etc.
    uu = sum(t * t for t in u)
    vv = sum(t * t for t in v)
    uv = sum(u[k] * v[k] for k in range(3))
    det = uu * vv - uv * uv
    if det == 0:
        raise DegenerateTri("collinear vertices")
    x = (uu * vv - uv * vv) / (2 * det)
    y = (vv * uu - uv * uu) / (2 * det)
    center = tuple(af[k] + x * u[k] + y * v[k] for k in range(3))
    r2 = sum((center[k] - af[k]) ** 2 for k in range(3))
    d2 = sum((center[k] - pf[k]) ** 2 for k in range(3))
    if d2 > r2:
        return 1
    if d2 < r2:
        return -1
    return 0


def encroaches_face(tri, p) -> bool:
    """True iff p is strictly inside the open equatorial ball of tri."""
    return _equatorial_cmp(tri, p) < 0


def dihedral_angles(a, b, c, d):
    """Six dihedral angles of tet (a,b,c,d) in degrees, one per edge,
    each in (0, 180) for a non-degenerate tet."""
    if orient3d(a, b, c, d) == 0:
        raise DegenerateTet("coplanar vertices")
    pts = (a, b, c, d)
    angles = []
    # edge (i,j); the two faces incident to it are (i,j,k) and (i,j,l)
    for i, j in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        k, l = [m for m in range(4) if m not in (i, j)]
        e = _sub(pts[j], pts[i])
        n1 = _cross(e, _sub(pts[k], pts[i]))
        n2 = _cross(e, _sub(pts[l], pts[i]))
        cosang = _dot(n1, n2) / math.sqrt(_dot(n1, n1) * _dot(n2, n2))
        cosang = max(-1.0, min(1.0, cosang))
        angles.append(math.degrees(math.acos(cosang)))
    return angles
