"""Exception types raised across the package."""


class PathSensError(Exception):
    """Base class for all package errors."""


class RegistryError(PathSensError, KeyError):
    """Unknown model identifier."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown model"


class UnsupportedOrderError(PathSensError, ValueError):
    """A partial derivative of total order above 2 was requested."""


class DivergenceError(PathSensError, ArithmeticError):
    """A simulated state became non-finite.

    ``step`` is the index n of the step whose result (the state at
    t_{n+1}) was non-finite; ``path_index`` is set when the failing path
    belongs to a Monte Carlo batch.
    """

    def __init__(self, step, path_index=None):
        self.step = int(step)
        self.path_index = None if path_index is None else int(path_index)
        where = f"step {self.step}"
        if self.path_index is not None:
            where += f" of path {self.path_index}"
        super().__init__(f"non-finite state at {where}")


class InsufficientDataError(PathSensError, ValueError):
    """Too few usable level records to fit a rate."""


class TooLargeError(PathSensError, ValueError):
    """Enumeration of a product distribution would exceed the size limit."""
