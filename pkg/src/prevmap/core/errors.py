"""
Exception hierarchy for prevmap.
"""


class PrevmapError(Exception):
    """Base class for all data and model errors raised by prevmap."""


class InvariantViolation(PrevmapError, ValueError):
    """A value or table breaks one of its documented invariants."""


class DataTooShort(PrevmapError):
    """Too few observations for the requested estimate."""

    def __init__(self, n: int, minimum: int) -> None:
        super().__init__(f"need at least {minimum} observations, got {n}")
        self.n = n
        self.minimum = minimum


class TooFewNonzero(PrevmapError):
    """Signed-rank test has fewer non-zero observations than it needs."""

    def __init__(self, n_effective: int, minimum: int) -> None:
        super().__init__(
            f"need at least {minimum} non-zero observations, got {n_effective}"
        )
        self.n_effective = n_effective
        self.minimum = minimum


class ZeroVariance(PrevmapError):
    """Data has zero sample variance where a scale is required."""


class LengthMismatch(PrevmapError):
    """Two per-voxel sequences are not aligned."""


class DimensionMismatch(PrevmapError):
    """Volume geometries disagree."""


class EllipseOutOfBounds(PrevmapError):
    """A toy activation ellipse cannot fit inside the grid."""


class ParseError(PrevmapError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None) -> None:
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line


class IndexOutOfRange(PrevmapError, IndexError):
    """A slice or axis index lies outside the volume."""


class QuadratureFailure(PrevmapError):
    """Numerical integration did not reach the requested tolerance."""


class DegenerateAlternative(PrevmapError):
    """The local alternative has zero efficacy, so efficiencies are undefined."""
