"""Exception types shared across modules."""
from .scheme import PlanError


class SchemaError(ValueError):
    """Input data do not match the expected layout or the plan."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)


class OutOfSupport(ValueError):
    """A sensitive value lies outside the support box."""

    def __init__(self, dim, value, row=None):
        self.dim = dim
        self.value = value
        self.row = row
        where = "" if row is None else f" in row {row}"
        super().__init__(f"value {value!r}{where} outside the support in dimension {dim}")


class EmptyCellError(ValueError):
    """A conditional-mean cell needed downstream has no observations."""

    def __init__(self, message, cells=()):
        self.cells = list(cells)
        super().__init__(message)


class SingularMatrixError(ArithmeticError):
    """Design matrix is rank deficient."""

    def __init__(self, message, columns=()):
        self.columns = list(columns)
        super().__init__(message)


__all__ = ["PlanError", "SchemaError", "OutOfSupport", "EmptyCellError", "SingularMatrixError"]
