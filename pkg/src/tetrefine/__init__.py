"""Parallel Delaunay quality tetrahedral meshing.

Refines a piecewise linear complex into a conforming tetrahedral mesh in
which (almost) every tetrahedron has radius-edge ratio below a bound B.
Steiner points are inserted in rounds (encroached subsegments, then
encroached subfaces, then bad tets) and each round's candidates are
filtered down to a conflict-free subset by a grow-and-blast claim race,
so any worker count produces the same mesh.
"""

from .errors import TetrefineError
from .plc import PLC, unit_cube, validate
from .refine import RefineConfig, refine
from .stats import QualityReport, analyze, speedup_table
from .synth import SynthSpec, generate

__all__ = [
    "PLC", "QualityReport", "RefineConfig", "SynthSpec", "TetrefineError",
    "analyze", "generate", "refine", "speedup_table", "unit_cube",
    "validate",
]

__version__ = "0.1.0"
