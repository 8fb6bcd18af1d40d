"""Exception hierarchy shared by all oaccomp modules."""


class OacError(Exception):
    """Base class for every error raised by oaccomp."""


class InvalidParam(OacError, ValueError):
    """A model or metric parameter is outside its admissible range."""


class DimensionMismatch(OacError, ValueError):
    """Vector/matrix sizes are inconsistent."""


class CombinatorialBlowup(OacError):
    """The number of input profiles exceeds the configured cap."""


class NonSymmetricFunction(OacError, ValueError):
    """A custom aggregation function was not declared symmetric."""


class WrongFunction(OacError, ValueError):
    """A routine was handed constraints from an unsupported function."""


class Infeasible(OacError):
    """No candidate modulation vector separates all distinct outputs."""


class SolverDiverged(OacError):
    """The optimizer produced non-finite iterates."""


class ZeroChannel(OacError):
    """Channel inversion was requested for a (numerically) zero channel."""


class OverlapViolation(OacError):
    """Two coincident superimposed points carry different function values."""
