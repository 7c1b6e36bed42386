"""Exception types shared across the package."""


class TetrefineError(Exception):
    """Base class for all package errors."""


class DegenerateTet(TetrefineError):
    """Four coplanar (zero-volume) vertices where a tetrahedron was required."""


class DegenerateTri(TetrefineError):
    """Three collinear vertices where a triangle was required."""


class EmptyPLC(TetrefineError):
    """Operation requires at least one point."""


class AllCoplanar(TetrefineError):
    """Point set has no four non-coplanar members."""


class DuplicatePoint(TetrefineError):
    """Exact duplicate point where distinct points were required."""


class TooClose(TetrefineError):
    """Insertion point numerically indistinguishable from an existing vertex."""


class CavityNotStarShaped(TetrefineError):
    """Cavity retriangulation failed a star-shape check."""


class InvalidPLC(TetrefineError):
    """PLC failed validation; carries the violation list."""

    def __init__(self, violations):
        super().__init__(f"{len(violations)} PLC violation(s)")
        self.violations = violations


class ParseError(TetrefineError):
    """Malformed input file."""

    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class ValidationError(TetrefineError):
    """A parsed PLC failed validation."""

    def __init__(self, violations):
        super().__init__(f"{len(violations)} PLC violation(s)")
        self.violations = violations


class MissingBaseline(TetrefineError):
    """Speedup table requires a 1-worker baseline run."""


class PlacementFailure(TetrefineError):
    """Synthetic rectangle placement exceeded its rejection budget."""


class IOFailure(TetrefineError):
    """File could not be written."""
