"""Exception types raised across the package."""


class SirMpcError(Exception):
    """Base class for all package errors."""


class DomainError(SirMpcError, ValueError):
    """An argument lies outside the domain of a mathematical function."""


class IntegrationError(SirMpcError, ArithmeticError):
    """A numerical step produced an inadmissible state.

    Attributes
    ----------
    time : float or None
        Non-dimensional time at which the failure was detected.
    """

    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (at tau={time:.6g})")
        self.time = time


class InsufficientHorizonError(SirMpcError, ValueError):
    """A trajectory ends before the epidemic has settled."""


class DegenerateEpidemicError(SirMpcError, ValueError):
    """Quantity is undefined because no infection ever occurs."""


class InfeasibleInterventionError(SirMpcError, ValueError):
    """No reproduction number in the search bracket meets the target."""


class ConfigError(SirMpcError, ValueError):
    """Invalid scenario configuration.

    Attributes
    ----------
    line : int or None
        1-based line number in the config text, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class NumericFailure(SirMpcError):
    """A scenario stage failed numerically.

    Attributes
    ----------
    module : str
        Name of the package module whose computation failed.
    """

    def __init__(self, module, cause):
        super().__init__(f"{module}: {cause}")
        self.module = module
        self.cause = cause
