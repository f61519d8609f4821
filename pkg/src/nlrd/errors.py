"""Exception hierarchy shared by every module.

The CLI maps ``ValidationError`` to exit code 1 and ``NumericalError`` to
exit code 2, so numeric routines should raise one of the subclasses below
rather than a bare ``ValueError``/``ArithmeticError``.
"""


class NLRDError(Exception):
    """Base class for all package errors."""

    kind = "error"


class ValidationError(NLRDError, ValueError):
    """Bad input: violates a documented precondition."""

    kind = "validation"


class NumericalError(NLRDError, ArithmeticError):
    """A computation could not produce a trustworthy number."""

    kind = "numerical"


class PoleError(NumericalError):
    """Evaluation at a pole (gamma function, g* at even epsilon, ...)."""

    kind = "pole"


class DivergenceError(NumericalError):
    """The requested quantity is genuinely divergent."""

    kind = "divergence"


class UVDivergenceError(DivergenceError):
    """Momentum integral not convergent at large wavenumber."""

    kind = "uv_divergence"


class CriticalPointError(NumericalError):
    """Evaluation at (or beyond) the critical point, e.g. F(k) <= 0."""

    kind = "critical_point"


class ToleranceError(NumericalError):
    """Adaptive routine failed to meet its error target."""

    kind = "tolerance"


class BlowUpError(NumericalError):
    """ODE solution diverged in finite time."""

    kind = "blow_up"


class CapacityError(NumericalError):
    """Simulation exceeded its particle cap."""

    kind = "capacity"
