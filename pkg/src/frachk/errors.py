"""Exception types raised by frachk."""


class FracHKError(Exception):
    """Base class for all frachk errors."""


class ScenarioError(FracHKError, ValueError):
    """
    Invalid scenario data.

    Args:
        field: JSON path of the offending field (e.g. "weights[2][2]")
        message: What is wrong with it
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class SolverError(FracHKError, RuntimeError):
    """Numerical failure inside the state, costate or sweep solvers."""
