"""Exception types shared across the package."""
from __future__ import annotations


class SviSimError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SviSimError):
    """A state or initial condition lies outside the constraint set."""


class NumericalError(SviSimError):
    """A simulation produced a non-finite value.

    Carries the step index at which the blow-up was detected so callers
    can report where a run died.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ConfigError(SviSimError):
    """Invalid experiment configuration.

    ``diagnostics`` is a list of ``(path, message)`` pairs where ``path``
    points into the config document (for example ``"solver.scheme"``).
    """

    def __init__(self, diagnostics: list[tuple[str, str]]):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(f"{p}: {m}" for p, m in self.diagnostics)
        super().__init__(lines or "invalid configuration")


class PerturbationRejected(SviSimError):
    """A perturbed coefficient family failed its structural probes."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class TrendAssertionError(SviSimError):
    """An asserted monotone trend did not hold in an experiment report."""
