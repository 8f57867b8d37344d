"""Exception hierarchy shared by all modules.

The CLI maps :class:`ValidationError` (and DSL parse errors) to exit code 1 and
:class:`NumericalError` subclasses to exit code 2.
"""


class RamanPassError(Exception):
    """Base class for every error raised by this package."""


class DSLError(RamanPassError):
    """Base class for pulse-expression errors; carries a character offset."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class LexError(DSLError):
    pass


class ParseError(DSLError):
    pass


class ArityError(ParseError):
    pass


class ValidationError(RamanPassError):
    """Invalid protocol parameters, protocol file content or sweep grid."""


class NumericalError(RamanPassError):
    """Base class for failures that happen while computing."""


class EvalDomainError(NumericalError, DSLError):
    """An envelope expression left its mathematical domain."""


class SingularityError(NumericalError):
    """The mixing angle reached the cap where sec(theta) diverges."""


class IntegrationError(NumericalError):
    """The ODE integrator failed (e.g. step-size underflow)."""

    def __init__(self, message: str, tau: float | None = None):
        self.tau = tau
        if tau is not None:
            message = f"{message} (at tau = {tau!r})"
        super().__init__(message)


class ThresholdError(NumericalError):
    """A requested population threshold is not reached inside the domain."""
