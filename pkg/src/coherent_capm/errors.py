"""Exception hierarchy. Each family maps onto a CLI exit status."""


class CoherentRiskError(Exception):
    exit_code = 1


class ConfigError(CoherentRiskError, ValueError):
    """Invalid parameters or configuration (exit status 2)."""

    exit_code = 2


class DomainError(ConfigError):
    """Argument outside the domain of a function."""


class NumericalError(CoherentRiskError):
    exit_code = 3


class NonConvergenceError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateRewardError(NumericalError):
    """Expected discounted P&L vector is zero; the optimization slice is empty."""


class UnboundedRiskError(NumericalError):
    """A trade with unit reward and nonpositive risk exists."""


class ZeroDenominatorError(NumericalError):
    pass


class RiskNeutralityError(NumericalError):
    pass


class AbsoluteContinuityError(NumericalError):
    pass


class DataError(CoherentRiskError, ValueError):
    exit_code = 4


class ParseError(DataError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class EmptyDataError(DataError):
    pass


class NonFiniteValueError(ParseError):
    pass


class SamplerError(DataError):
    """A user-supplied sampler or payoff failed."""


class PayoffError(DataError):
    """Payoff evaluation failed or produced non-finite values."""


class KinkWarning(UserWarning):
    """A scenario landed exactly on a payoff kink; the right derivative was used."""
