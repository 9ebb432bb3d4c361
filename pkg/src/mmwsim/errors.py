"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid or infeasible parameters."""


class InventoryParseError(ValueError):
    """A path inventory file row violates the documented format."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AllocationTooLarge(RuntimeError):
    """Exhaustive search refused because the assignment space is too big."""

    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"exhaustive search over {size} assignments exceeds limit {limit}")
