"""Exception hierarchy.

Every error carries enough context to be mapped onto a CLI exit code:
``BadInputError`` subclasses map to 4, ``HypothesisError`` subclasses to 2.
"""


class DBVPError(Exception):
    """Base class for all package errors."""


class BadInputError(DBVPError, ValueError):
    """Malformed or out-of-domain input."""


class GridError(BadInputError, IndexError):
    """Index outside the grid, or mesh functions on mismatched grids."""


class SingularOperatorError(BadInputError):
    """The shifted difference operator is singular at the requested shift."""

    def __init__(self, lam, n=None, eigenvalue=None, message=None):
        self.lam = lam
        self.n = n
        self.eigenvalue = eigenvalue
        if message is None:
            message = (
                f"shift lambda={lam!r} is within singular tolerance of "
                f"eigenvalue lambda_{n}={eigenvalue!r}"
            )
        super().__init__(message)


class ExpressionSyntaxError(BadInputError):
    def __init__(self, message, source, position):
        self.source = source
        self.position = position
        super().__init__(f"{message} at position {position}: {source!r}")


class UnknownIdentifierError(BadInputError):
    def __init__(self, name, source=None, position=None):
        self.name = name
        self.source = source
        self.position = position
        super().__init__(f"unknown identifier {name!r}")


class EvaluationError(BadInputError, ArithmeticError):
    """Domain fault while evaluating an expression (log of nonpositive, 1/0, ...)."""

    def __init__(self, message, subexpression=None, t=None, y=None):
        self.subexpression = subexpression
        self.t = t
        self.y = y
        where = []
        if subexpression is not None:
            where.append(f"in {subexpression}")
        if t is not None:
            where.append(f"t={t!r}")
        if y is not None:
            where.append(f"y={y!r}")
        super().__init__(message + (" (" + ", ".join(where) + ")" if where else ""))


class ProblemFormatError(BadInputError):
    """A problem or linear-problem document does not match its schema."""


class HypothesisError(DBVPError):
    """A hypothesis of the theory is not met (bracket, regime, monotonicity)."""


class OutOfRegimeError(HypothesisError, ValueError):
    """Shift at or above the first eigenvalue, where the kernel loses its sign."""

    def __init__(self, lam, lambda_1):
        self.lam = lam
        self.lambda_1 = lambda_1
        super().__init__(
            f"shift lambda={lam!r} is outside the maximum-principle regime "
            f"lambda < lambda_1={lambda_1!r}"
        )


class BracketError(HypothesisError):
    """Lower/upper functions do not form a valid bracket."""


class NotConvergedError(DBVPError):
    """Iteration stopped at max_iter without meeting the stopping rule."""
