"""Exception hierarchy.

Everything numeric or domain related derives from :class:`SelbiasError` so
the command line front end can map it to a single exit status.
"""


class SelbiasError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParamsError(SelbiasError, ValueError):
    pass


class DimensionMismatchError(SelbiasError, ValueError):
    pass


class NotPositiveDefiniteError(SelbiasError, ValueError):
    pass


class NonConvergenceError(SelbiasError, ArithmeticError):
    """Adaptive quadrature ran out of nodes before meeting its tolerance."""


class ProbabilityRangeError(SelbiasError, ArithmeticError):
    """A computed probability fell outside [0, 1] by more than the tolerance."""


class DegenerateTruncationError(SelbiasError, ArithmeticError):
    """The truncation region has (numerically) zero probability."""


class BudgetExhaustedError(SelbiasError, RuntimeError):
    pass


class DegenerateDesignError(SelbiasError, ValueError):
    pass
