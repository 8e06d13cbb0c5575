"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceError(RuntimeError):
    """A computation would exceed the configured memory/time budget."""


class DiagnosticError(RuntimeError):
    """A Monte Carlo estimator failed its own quality diagnostics."""

    def __init__(self, message, ess=None):
        super().__init__(message)
        self.ess = ess


class SamplerInitError(RuntimeError):
    """The initial configuration of a chain has zero density."""
