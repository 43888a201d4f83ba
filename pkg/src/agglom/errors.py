"""Exception taxonomy shared by every module.

Configuration problems (bad parameters, malformed config files, grid
mismatches) are distinct from runtime numeric failures so the CLI can map
them to different exit codes.
"""

from __future__ import annotations


class AgglomError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(AgglomError):
    """Invalid parameter value, grid spec, config file, or grid mismatch."""


class ResolutionError(ConfigurationError):
    """A kernel bandwidth too small for the grid it is discretized on."""


class DomainError(AgglomError):
    """An input violates a mathematical precondition (negative density, ...)."""


class NumericError(AgglomError):
    """NaN/Inf contamination or a failed internal consistency check."""


class SolverInstabilityError(NumericError):
    """The explicit time stepper produced values outside its positivity
    budget; retry with a smaller safety factor."""
