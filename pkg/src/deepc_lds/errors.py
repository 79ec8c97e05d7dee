"""Exception hierarchy; the CLI maps each family to an exit code."""


class ValidationError(ValueError):
    """Bad input data or violated precondition (exit code 2)."""


class InfeasibleError(RuntimeError):
    """An optimal control problem has no feasible point (exit code 3)."""

    def __init__(self, message: str, block: str | None = None, dump: dict | None = None):
        super().__init__(message)
        self.block = block
        self.dump = dump or {}


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its tolerance (exit code 4)."""
