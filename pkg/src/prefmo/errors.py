"""Exception hierarchy.

Each family maps to one CLI exit code (see ``prefmo.cli``).
"""

from __future__ import annotations


class PrefmoError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(PrefmoError, ValueError):
    """Malformed input: bad probabilities, wrong reward kind, bad document."""

    exit_code = 2


class DomainError(ValidationError):
    """Input outside the domain where an operation is defined."""


class CapExceededError(PrefmoError):
    """An enumeration would exceed its configured size cap."""

    exit_code = 3


class NumericalError(PrefmoError, ArithmeticError):
    """Numerical breakdown (LP failure, singular basis, ...)."""

    exit_code = 4


class SingularBasisError(NumericalError):
    """Count vectors of the ordered histories are not linearly independent."""


class InconsistentOracleError(NumericalError):
    """Comparison answers left an empty admissible weight region."""
