"""Exception hierarchy shared across the package."""


class AwareError(Exception):
    """Base class for every error raised by this package."""


class IngestionError(AwareError):
    """A dataset file is missing or unreadable."""


class FormatError(AwareError):
    """A dataset file is readable but malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(AwareError):
    """An attribute value does not fit the attribute schema."""


class SplitError(AwareError):
    pass


class ShapeError(AwareError):
    """Operand shapes are incompatible."""


class ContractError(AwareError):
    """A precondition of an operation does not hold."""


class BudgetError(AwareError):
    """A brute-force enumeration would exceed its configured budget."""


class NonFiniteError(AwareError):
    """A NaN or infinity showed up where a finite number is required."""


class MetricError(AwareError):
    pass
