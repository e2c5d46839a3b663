"""Exception types raised by the solvers."""


class WentzellError(Exception):
    """Base class for all solver errors."""


class BracketFailure(WentzellError):
    """No sign change where the theory guarantees one."""


class GridTooCoarse(WentzellError):
    """The grid cannot resolve the requested eigenmodes."""


class ShapeMismatch(WentzellError, ValueError):
    """Grids, horizons or sample counts disagree."""


class SingularSystem(WentzellError):
    """The elliptic system is numerically singular (shift close to an eigenvalue)."""


class IllConditioned(WentzellError):
    """Gram matrix too ill-conditioned for double precision."""


class IndexMismatch(WentzellError, ValueError):
    """Exponential family and eigenpairs are not index-aligned."""


class BreakdownZeroDenominator(WentzellError):
    """CG step denominator vanished."""


class MaxIterReached(RuntimeWarning):
    """CG stopped on the iteration cap; the result carries the last iterate."""
