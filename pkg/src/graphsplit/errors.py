"""Exception hierarchy shared by every graphsplit module."""


class GraphsplitError(Exception):
    """Base class for all library errors."""


class InvalidInputError(GraphsplitError, ValueError):
    """Malformed or non-finite data, or mismatched dimensions."""


class InvalidConfigError(GraphsplitError, ValueError):
    """Solver parameters outside the admissible range."""


class UnsupportedSchemeError(GraphsplitError):
    """The scheme cannot be executed by a single triangular sweep."""


class DivergenceError(GraphsplitError, ArithmeticError):
    """Non-finite values appeared during an iteration."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
