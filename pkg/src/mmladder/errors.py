"""Exception types shared across the package."""


class MMLadderError(Exception):
    """Base class for all package errors."""


class DomainError(MMLadderError, ValueError):
    """A parameter or argument lies outside its admissible domain."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class ConvergenceError(MMLadderError, ArithmeticError):
    """The eigensolver did not converge."""

    def __init__(self, message: str, dim: int, iterations: int):
        self.dim = dim
        self.iterations = iterations
        super().__init__(f"{message} (dim={dim}, iteration budget={iterations})")


class ParseError(MMLadderError, ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class OrderingError(MMLadderError, ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class InsufficientData(MMLadderError, ValueError):
    pass


class DegenerateFit(MMLadderError, ValueError):
    pass


class MissingQuotes(MMLadderError, ValueError):
    pass
