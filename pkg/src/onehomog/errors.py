"""
Error types raised by the onehomog modules.

Every named failure of the laboratory has its own class so callers (and the
CLI) can tell a missing root from a non-converging sweep. Value-type errors
also derive from ValueError and iteration failures from RuntimeError.
"""


class OneHomogError(Exception):
    """Base class for all onehomog errors."""


class IndexOutOfRange(OneHomogError, ValueError):
    """A skew coefficient index pair violates 1 <= i < j <= m."""


class NonConvergence(OneHomogError, RuntimeError):
    """An iteration (Jacobi sweeps, CG) exceeded its cap."""


class NoRoot(OneHomogError, ValueError):
    """The amplitude map never crosses the target value."""


class Degenerate(OneHomogError, ValueError):
    """The amplitude map is constant, so every t solves (quadratic profile)."""


class NoLinearSolution(OneHomogError, ValueError):
    """k = 1 was requested but Lambda has a trivial kernel."""


class ZeroGradient(OneHomogError, ValueError):
    """The gradient norm c vanishes where a division by c is needed."""


class DimensionMismatch(OneHomogError, ValueError):
    """An operation defined for planar maps received m != 2."""


class BadLayout(OneHomogError, ValueError):
    """Invalid polar grid parameters."""


class SupportEscapesDomain(OneHomogError, ValueError):
    """A test function's support ball is not strictly inside B_r."""


class ConfigError(OneHomogError, ValueError):
    """Scenario configuration could not be parsed or validated."""
