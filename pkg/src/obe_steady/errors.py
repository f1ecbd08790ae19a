"""Exception types shared by the analytic engine, the oracle and the CLI."""


class ObeSteadyError(Exception):
    """Base class for all errors raised by this package."""


class DarkStateError(ObeSteadyError):
    """Raised when a no-dark-state formula meets a polarization with a dark state."""

    def __init__(self, message: str = "circular polarization"):
        super().__init__(f"dark-exception: {message}")


class NonUniqueSteadyStateError(ObeSteadyError):
    """Raised when the steady state depends on the initial state."""

    def __init__(self, message: str, dimension: int | None = None):
        super().__init__(f"non-unique steady state: {message}")
        self.dimension = dimension


class ConvergenceError(ObeSteadyError):
    """Raised when a time integration has not reached the steady state."""


class NoDarkStateError(ObeSteadyError):
    """Raised when dark states are requested for a transition without any."""
