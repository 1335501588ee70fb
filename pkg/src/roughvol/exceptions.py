class RoughVolError(Exception):
    """Base class for package errors."""


class DomainError(RoughVolError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateError(RoughVolError, ArithmeticError):
    """A denominator or derivative vanished; the estimator is undefined here."""

    def __init__(self, message: str, stage: str | None = None):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if stage else message)


class ConvergenceError(RoughVolError, ArithmeticError):
    """A series or iteration failed to reach the required accuracy."""


class InputError(RoughVolError, ValueError):
    """Malformed user input (files, configs, paths)."""
