"""
Error hierarchy for lrgeomcg
"""


class LRGeomCGError(Exception):
    """Base class for all library errors"""


class ArgumentError(LRGeomCGError, ValueError):
    """Invalid argument: dimension mismatch, out-of-range size, bad option"""


class BaseMismatchError(ArgumentError):
    """Tangent vectors combined at different base points"""


class SpecError(ArgumentError):
    """Experiment spec failed to parse or validate"""


class FormatError(ArgumentError):
    """Malformed sample, trace or factor file"""


class InsufficientSamplingError(LRGeomCGError):
    """Row/column coverage of the sampling set could not be achieved"""


class RankDeficiencyError(LRGeomCGError):
    """A retraction produced a matrix of rank lower than the manifold rank"""


class LineSearchError(LRGeomCGError):
    """Armijo backtracking exceeded its budget"""


class InvariantViolation(LRGeomCGError):
    """A runtime-asserted invariant was broken"""
