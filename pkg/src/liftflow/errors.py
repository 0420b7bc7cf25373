"""Exception types shared across the package."""


class LiftflowError(Exception):
    """Base class for all package errors."""


class ConfigError(LiftflowError):
    """Invalid configuration: bad parameter values, incompatible shapes,
    unknown config keys, or a time step violating a stability bound."""


class FormatError(LiftflowError):
    """Malformed input file (bad magic, truncation, inconsistent header)."""


class FlowAbortError(LiftflowError):
    """A flow produced non-finite values (step size or data fault)."""


class ProxConvergenceError(LiftflowError):
    """Proximal solve did not reach the requested residual.

    Carries the final residual so the caller can tell whether the
    tolerance was too tight or tau too large for the iteration budget.
    """

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
