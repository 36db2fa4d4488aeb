"""Exception types shared across the package."""


class GateError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GateError, ValueError):
    pass


class NotPositiveDefinite(GateError, ArithmeticError):
    """Raised by :func:`gatelearn.linalg.cholesky` when a pivot falls below tolerance."""

    def __init__(self, pivot_index, pivot=None):
        self.pivot_index = pivot_index
        self.pivot = pivot
        msg = f"matrix is not positive definite (pivot {pivot_index}"
        if pivot is not None:
            msg += f", value {pivot:.3g}"
        super().__init__(msg + ")")


class SingularSystem(GateError, ArithmeticError):
    """IRLS normal equations could not be factored even with the largest ridge."""


class NonBinaryLabel(GateError, ValueError):
    pass


class SingularBaseDesign(GateError, ArithmeticError):
    pass


class EmptyCandidateSet(GateError, ValueError):
    pass


class EmptyPool(GateError, ValueError):
    pass


class PoolExhausted(GateError, RuntimeError):
    pass


class InsufficientPool(GateError, ValueError):
    pass


class OracleFailure(GateError, RuntimeError):
    def __init__(self, index, reason="index not queryable"):
        self.index = index
        super().__init__(f"oracle refused index {index}: {reason}")


class EmptyInactiveSet(GateError, ValueError):
    pass


class SingularAugmentedDesign(GateError, ArithmeticError):
    pass


class InvalidSpec(GateError, ValueError):
    pass


class ParseError(GateError, ValueError):
    def __init__(self, line, column, message):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class MissingColumn(GateError, KeyError):
    def __str__(self):
        return f"missing column: {self.args[0]!r}"


class SingleClass(GateError, ValueError):
    pass


class EmptyTruthSet(GateError, ValueError):
    pass


class EmptyResults(GateError, ValueError):
    pass
