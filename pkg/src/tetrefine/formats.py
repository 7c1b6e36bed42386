"""ASCII file formats: .node/.poly/.smesh input complexes, .node/.ele/.face
meshes, and JSON quality reports.

Input files may be 0- or 1-based (detected from the first listed index);
everything is normalized to 0-based in memory.  Output files are 1-based
to match the established .ele convention, with coordinates printed to 17
significant digits so they round-trip bit-exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import IOFailure, ParseError, ValidationError
from .plc import PLC, validate

_F = "{:.17g}".format


# ---------------------------------------------------------------------------
# tokenized line reader

class _Lines:
    """Comment- and blank-stripped token lines with positions kept for
    error reporting."""

    def __init__(self, path):
        self.path = path
        self.items = []  # (lineno, [tokens])
        try:
            with open(path) as fh:
                for lineno, raw in enumerate(fh, 1):
                    body = raw.split("#", 1)[0].strip()
                    if body:
                        self.items.append((lineno, body.split()))
        except OSError as exc:
            raise ParseError(path, 0, str(exc))
        self.pos = 0

    def next(self, reason="unexpected end of file"):
        if self.pos >= len(self.items):
            lineno = self.items[-1][0] if self.items else 0
            raise ParseError(self.path, lineno, reason)
        item = self.items[self.pos]
        self.pos += 1
        return item

    def done(self):
        return self.pos >= len(self.items)


def _ints(path, lineno, toks, n=None):
    try:
        vals = [int(t) for t in toks]
    except ValueError:
        raise ParseError(path, lineno, f"expected integers, got {toks!r}")
    if n is not None and len(vals) < n:
        raise ParseError(path, lineno, f"expected {n} integers")
    return vals


def _floats(path, lineno, toks):
    try:
        return [float(t) for t in toks]
    except ValueError:
        raise ParseError(path, lineno, f"expected numbers, got {toks!r}")


# ---------------------------------------------------------------------------
# node section (shared by every reader)

def _read_node_section(lines, header=None):
    """Points plus the detected index base.  `header` is a pre-consumed
    first line for files that embed their node section."""
    if header is None:
        header = lines.next("missing node header")
    lineno, toks = header
    vals = _ints(lines.path, lineno, toks, 1)
    count = vals[0]
    if count < 0:
        raise ParseError(lines.path, lineno, "negative point count")
    dim = vals[1] if len(vals) > 1 else 3
    if count and dim != 3:
        raise ParseError(lines.path, lineno, f"dimension {dim}, expected 3")
    points = []
    base = 0
    for k in range(count):
        lineno, toks = lines.next(
            f"node file declares {count} points but contains {k}")
        if len(toks) < 4:
            raise ParseError(lines.path, lineno, "point needs index + x y z")
        idx = _ints(lines.path, lineno, toks[:1])[0]
        if k == 0:
            if idx not in (0, 1):
                raise ParseError(lines.path, lineno,
                                 f"first point index {idx}, expected 0 or 1")
            base = idx
        elif idx != base + k:
            raise ParseError(lines.path, lineno,
                             f"point index {idx}, expected {base + k}")
        points.append(tuple(_floats(lines.path, lineno, toks[1:4])))
    return points, base


def read_node(path):
    lines = _Lines(path)
    points, base = _read_node_section(lines)
    if not lines.done():
        lineno, _ = lines.next()
        raise ParseError(path, lineno, "trailing content after node section")
    return points, base


# ---------------------------------------------------------------------------
# facet sections

def _facet_to_features(path, lineno, verts, npts, base, segments, polygons):
    verts = [v - base for v in verts]
    for v in verts:
        if not 0 <= v < npts:
            raise ParseError(path, lineno, f"vertex index {v + base} out of range")
    if len(verts) == 1:
        raise ParseError(path, lineno, "single-vertex facet")
    if len(verts) == 2:
        a, b = verts
        segments.add((min(a, b), max(a, b)))
        return
    polygons.append(tuple(verts))
    n = len(verts)
    for k in range(n):
        a, b = verts[k], verts[(k + 1) % n]
        segments.add((min(a, b), max(a, b)))


def _read_smesh_facets(lines, npts, base, segments, polygons):
    lineno, toks = lines.next("missing facet count")
    nfac = _ints(lines.path, lineno, toks, 1)[0]
    for _ in range(nfac):
        lineno, toks = lines.next("fewer facets than declared")
        nv = _ints(lines.path, lineno, toks[:1])[0]
        if len(toks) < 1 + nv:
            raise ParseError(lines.path, lineno,
                             f"facet declares {nv} vertices, line has fewer")
        verts = _ints(lines.path, lineno, toks[1:1 + nv])
        _facet_to_features(lines.path, lineno, verts, npts, base,
                           segments, polygons)


def _read_poly_facets(lines, npts, base, segments, polygons):
    lineno, toks = lines.next("missing facet count")
    nfac = _ints(lines.path, lineno, toks, 1)[0]
    for _ in range(nfac):
        lineno, toks = lines.next("fewer facets than declared")
        vals = _ints(lines.path, lineno, toks, 1)
        npolys = vals[0]
        nholes = vals[1] if len(vals) > 1 else 0
        if nholes:
            raise ParseError(lines.path, lineno,
                             "facet holes are not supported")
        for _ in range(npolys):
            lineno, toks = lines.next("fewer polygons than declared")
            nv = _ints(lines.path, lineno, toks[:1])[0]
            if len(toks) < 1 + nv:
                raise ParseError(lines.path, lineno,
                                 f"polygon declares {nv} vertices, "
                                 "line has fewer")
            verts = _ints(lines.path, lineno, toks[1:1 + nv])
            _facet_to_features(lines.path, lineno, verts, npts, base,
                               segments, polygons)


def read_plc(facet_path, node_path=None) -> PLC:
    """PLC from a .poly or .smesh file, with points taken from the file's
    own node section or from `node_path` when that section is empty.
    The result is validated; violations raise ValidationError."""
    lines = _Lines(facet_path)
    header = lines.next("empty facet file")
    count = _ints(facet_path, header[0], header[1], 1)[0]
    if count > 0:
        points, base = _read_node_section(lines, header)
    else:
        if node_path is None:
            raise ParseError(facet_path, header[0],
                             "no embedded points and no node file given")
        points, base = read_node(node_path)
    segments, polygons = set(), []
    if str(facet_path).endswith(".poly"):
        _read_poly_facets(lines, len(points), base, segments, polygons)
    else:
        _read_smesh_facets(lines, len(points), base, segments, polygons)
    plc = PLC(points=points, segments=sorted(segments), polygons=polygons)
    violations = validate(plc)
    if violations:
        raise ValidationError(violations)
    return plc


# ---------------------------------------------------------------------------
# writers

def _open_write(path):
    try:
        return open(path, "w")
    except OSError as exc:
        raise IOFailure(f"{path}: {exc}")


def write_node(path, points, origins=None):
    with _open_write(path) as fh:
        nattr = 1 if origins is not None else 0
        fh.write(f"{len(points)} 3 {nattr} 0\n")
        for k, p in enumerate(points):
            row = f"{k + 1} {_F(p[0])} {_F(p[1])} {_F(p[2])}"
            if origins is not None:
                row += f" {int(origins[k])}"
            fh.write(row + "\n")


def write_plc(plc: PLC, node_path, poly_path):
    """Inverse of read_plc: .node plus a .poly whose 2-vertex facets carry
    the segments that are not polygon boundary edges."""
    write_node(node_path, plc.points)
    poly_edges = set()
    for poly in plc.polygons:
        n = len(poly)
        for k in range(n):
            a, b = poly[k], poly[(k + 1) % n]
            poly_edges.add((min(a, b), max(a, b)))
    loose = [s for s in plc.segments if s not in poly_edges]
    with _open_write(poly_path) as fh:
        fh.write("0 3 0 0\n")
        fh.write(f"{len(plc.polygons) + len(loose)} 0\n")
        for poly in plc.polygons:
            fh.write("1 0\n")
            fh.write(" ".join([str(len(poly))]
                              + [str(v + 1) for v in poly]) + "\n")
        for (a, b) in loose:
            fh.write("1 0\n")
            fh.write(f"2 {a + 1} {b + 1}\n")
        fh.write("0\n0\n")


def write_mesh(mesh, node_path, ele_path, face_path=None):
    """Vertices with their input/steiner origin attribute, alive tets, and
    (optionally) subfaces with their parent polygon id attribute."""
    write_node(node_path, [tuple(mesh.points[v]) for v in range(mesh.nv)],
               origins=mesh.vert_origin[:mesh.nv])
    tets = mesh.real_tets()
    with _open_write(ele_path) as fh:
        fh.write(f"{len(tets)} 4 0\n")
        for k, t in enumerate(tets):
            a, b, c, d = (int(v) + 1 for v in mesh.tv[t])
            fh.write(f"{k + 1} {a} {b} {c} {d}\n")
    if face_path is None:
        return
    with _open_write(face_path) as fh:
        faces = sorted(mesh.subfaces.items())
        fh.write(f"{len(faces)} 1\n")
        for k, (key, pid) in enumerate(faces):
            a, b, c = (v + 1 for v in key)
            fh.write(f"{k + 1} {a} {b} {c} {pid}\n")


def read_mesh(node_path, ele_path):
    """Vertex array, origin flags, and tet index array from mesh files."""
    points, base = read_node(node_path)
    origins = []
    lines = _Lines(node_path)
    lineno, toks = lines.next()
    vals = _ints(node_path, lineno, toks)
    nattr = vals[2] if len(vals) > 2 else 0
    for _ in points:
        lineno, toks = lines.next()
        origins.append(int(float(toks[4])) if nattr >= 1 and len(toks) > 4
                       else 0)
    lines = _Lines(ele_path)
    lineno, toks = lines.next("missing tet header")
    ntet = _ints(ele_path, lineno, toks, 1)[0]
    tets = []
    for k in range(ntet):
        lineno, toks = lines.next(
            f"ele file declares {ntet} tets but contains {k}")
        vals = _ints(ele_path, lineno, toks)
        if len(vals) < 5:
            raise ParseError(ele_path, lineno, "tet needs index + 4 vertices")
        tets.append(tuple(v - base for v in vals[1:5]))
    for t in tets:
        for v in t:
            if not 0 <= v < len(points):
                raise ParseError(ele_path, 0, f"vertex index {v} out of range")
    return (np.array(points, dtype=np.float64),
            np.array(origins, dtype=np.uint8),
            np.array(tets, dtype=np.int64) if tets
            else np.empty((0, 4), dtype=np.int64))


class MeshView:
    """Read-only stand-in exposing the slice of the mesh interface that
    the quality scan needs, built from files."""

    def __init__(self, points, origins, tets):
        self.points = points
        self.vert_origin = origins
        self.nv = len(points)
        self.tv = tets
        self.subfaces = {}

    def real_tets(self):
        return list(range(len(self.tv)))


def read_mesh_view(node_path, ele_path) -> MeshView:
    return MeshView(*read_mesh(node_path, ele_path))


# ---------------------------------------------------------------------------
# reports

_REPORT_KEYS = ("input_points", "steiner_points", "tet_count",
                "bad_tet_count", "skipped", "dihedral_histogram",
                "per_round", "total_time")


def report_to_json(report) -> str:
    """Canonical serialization: fixed key order, two-space indent."""
    if isinstance(report, dict):
        d = {k: report[k] for k in _REPORT_KEYS}
    else:
        d = {k: getattr(report, k) for k in _REPORT_KEYS}
    return json.dumps(d, indent=2) + "\n"


def write_report(report, path):
    with _open_write(path) as fh:
        fh.write(report_to_json(report))


def read_report(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IOFailure(f"{path}: {exc}")
