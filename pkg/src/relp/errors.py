"""Exception types shared across the package."""


class RelpError(Exception):
    """Base class for all package errors."""


class DataError(RelpError):
    """Malformed or invalid market data.

    Carries optional ``row``/``col`` (1-based) locating the offending cell.
    """

    def __init__(self, message, row=None, col=None):
        if row is not None:
            message = f"{message} (row {row}" + (f", col {col})" if col is not None else ")")
        super().__init__(message)
        self.row = row
        self.col = col


class ConfigError(RelpError):
    """Invalid configuration or parameter value."""


class HistoryError(RelpError):
    """Not enough history to evaluate a predictor."""


class SolverError(RelpError):
    """The conic solver failed to reach its tolerances."""


class ConditionError(RelpError):
    """The robust solve was requested although its validity condition fails."""


class ContractError(RelpError):
    """A strategy violated the portfolio contract (off-simplex output)."""
