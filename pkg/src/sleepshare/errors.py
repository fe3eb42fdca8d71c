"""Exception types shared across the package.

Every numerical failure mode maps onto one of these so the CLI can turn
them into stable exit codes.
"""


class ShapeError(ValueError):
    """Operands have incompatible shapes; message carries both."""


class SingularMatrixError(ArithmeticError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot: int, detail: str = ""):
        self.pivot = pivot
        msg = f"matrix is not positive definite (failing pivot index {pivot})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DivergenceError(ArithmeticError):
    """Non-finite values appeared during iteration.

    `context` is free-form (elapsed simulated time, epoch/batch, ...) so
    the caller can report where the run blew up.
    """

    def __init__(self, message: str, context: str = ""):
        self.context = context
        super().__init__(f"{message} [{context}]" if context else message)


class ToleranceError(Exception):
    """A checked quantity exceeded its allowed tolerance."""

    def __init__(self, message: str, worst: float):
        self.worst = worst
        super().__init__(message)
