"""Exception hierarchy.

Two families matter to callers: ``PreconditionError`` for bad inputs or
configuration, and ``NumericalError`` for computations that ran but could not
deliver (timeouts, non-convergence, singular orbits).  The CLI maps them to
exit codes 2 and 3.
"""


class LorenzMixError(Exception):
    pass


class PreconditionError(LorenzMixError, ValueError):
    pass


class NumericalError(LorenzMixError, RuntimeError):
    pass


class NonSaddleSpectrum(PreconditionError):
    def __init__(self, eigenvalues, message=None):
        self.eigenvalues = tuple(eigenvalues)
        super().__init__(message or f"origin is not a Lorenz-type saddle: eigenvalues {self.eigenvalues}")


class ExpandingConditionError(PreconditionError):
    """``lambda_u > |lambda_s|`` fails, so the passage exponent alpha is not in (0, 1)."""


class UndefinedPointError(PreconditionError):
    """Evaluation at the singular point (or on the stable manifold of the origin)."""


class DivergenceError(NumericalError):
    """Step size underflow or non-finite state in the integrator."""


class SectionTimeout(NumericalError):
    """No section crossing before the time cap; the orbit is probably shadowing W^s(0)."""


class ConvergenceError(NumericalError):
    pass


class SingularOrbitError(NumericalError):
    """A suspension orbit reached (or came numerically too close to) the singular point."""


class BudgetError(NumericalError):
    pass


class RootBracketError(NumericalError):
    pass


class ExtractionError(NumericalError):
    pass
