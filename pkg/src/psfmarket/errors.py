"""Exception hierarchy shared by every module.

The CLI maps each family to a stable exit code (see ``psfmarket.cli``).
"""

from __future__ import annotations


class PsfMarketError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(PsfMarketError, ValueError):
    """One or more model parameters violate their bounds.

    ``violations`` maps each offending field name to a human readable
    description of the bound it broke.
    """

    def __init__(self, violations: dict[str, str]):
        self.violations = dict(violations)
        msg = "; ".join(self.violations.values())
        super().__init__(msg)


class RegimeError(PsfMarketError, ValueError):
    """A regime-specific closed form was requested outside its regime."""


class AccuracyError(PsfMarketError, ArithmeticError):
    """A quadrature did not reach the requested relative accuracy."""


class CoverageError(PsfMarketError, ValueError):
    """An entry-flow series does not cover the requested time span."""


class SimulationError(PsfMarketError, RuntimeError):
    """A simulation could not proceed (e.g. market clearing failed)."""


class EstimationError(PsfMarketError, ValueError):
    """A statistic could not be computed from the supplied sample."""


class InsufficientDataError(EstimationError):
    """Too few usable observations for an estimator."""


class DataFormatError(PsfMarketError, ValueError):
    """Input data file is malformed (missing column, bad year, duplicates)."""


class ConfigError(PsfMarketError, ValueError):
    """Configuration file or flag is invalid."""
