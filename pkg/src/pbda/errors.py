"""Exception hierarchy shared by every pbda module."""


class PBDAError(Exception):
    """Base class for all errors raised by pbda."""


class ValidationError(PBDAError, ValueError):
    """Input violates a documented precondition or invariant."""


class ManifestError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmbeddingFormatError(ValidationError):
    pass


class ImageFormatError(ValidationError):
    pass


class InsufficientInventoryError(ValidationError):
    def __init__(self, label, needed, available):
        self.label = label
        self.needed = needed
        self.available = available
        super().__init__(
            f"class {label!r}: need {needed} IIDA samples, only {available} "
            f"available (shortfall {needed - available})"
        )


class ConvergenceError(PBDAError, RuntimeError):
    """Iterative solver hit max_iter before reaching the residual target."""

    def __init__(self, iterations, residual, tol):
        self.iterations = iterations
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"solver did not converge in {iterations} iterations: "
            f"relative residual {residual:.3e} > tol {tol:.3e}"
        )
