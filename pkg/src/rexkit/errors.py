"""Exception hierarchy shared by every rexkit module."""


class RexError(Exception):
    """Base class for rexkit errors."""


class UsageError(RexError, ValueError):
    """Bad arguments or an unknown name."""


class ConfigError(UsageError):
    """Inconsistent configuration (e.g. a missing rule map entry)."""


class DataError(RexError):
    """Input data could not be parsed or validated."""


class ParseError(DataError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DomainError(DataError, ValueError):
    """A categorical symbol outside its attribute's domain."""


class TrainingError(RexError, ArithmeticError):
    def __init__(self, message, epoch):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


class InternalError(RexError, RuntimeError):
    """An invariant that should be unreachable was violated."""
