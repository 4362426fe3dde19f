"""Exception hierarchy shared by every thermoctl module."""


class ThermoctlError(Exception):
    """Base class for all library errors."""


class DomainError(ThermoctlError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleDuration(ThermoctlError):
    """The requested duration does not exceed the speed limit."""

    def __init__(self, tau, tau_min):
        self.tau = tau
        self.tau_min = tau_min
        super().__init__(
            f"duration tau={tau!r} is not above the speed limit tau_min={tau_min!r}"
        )


class BranchViolation(ThermoctlError):
    """No real energy gap produces the requested (p, pdot) pair."""


class QuadratureFailure(ThermoctlError):
    """Adaptive quadrature did not reach the requested accuracy."""


class NoConvergence(ThermoctlError):
    """An iterative solver ran out of iterations."""


class IntegratorFailure(ThermoctlError):
    """The ODE integrator could not complete the requested interval."""


class GridMismatch(ThermoctlError):
    """A protocol and a trajectory are not sampled on the same grid."""


class MissingBoundary(ThermoctlError):
    """An operation needs a boundary value that was not supplied."""


class ParseError(ThermoctlError):
    """A protocol file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
