"""Exception types shared across the package."""


class HMatrixError(Exception):
    pass


class InvalidArgument(HMatrixError, ValueError):
    pass


class DimensionMismatch(HMatrixError, ValueError):
    pass


class PivotBreakdown(HMatrixError, ArithmeticError):
    """Unpivoted elimination hit a pivot below the breakdown threshold."""


class SingularDiagonal(HMatrixError, ArithmeticError):
    pass


class StructureViolation(HMatrixError):
    """A block or cluster pair does not have the structure an operation needs."""


class UnknownCluster(HMatrixError, KeyError):
    pass
