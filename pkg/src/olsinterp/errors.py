"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
library failures onto process status without a lookup table.
"""

from __future__ import annotations


class OlsInterpError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InvalidInput(OlsInterpError, ValueError):
    """Malformed, non-finite or wrongly shaped input."""

    exit_code = 2


class RaggedRow(InvalidInput):
    """A CSV row whose field count differs from the first row."""

    def __init__(self, line: int, expected: int, found: int, path: str = "") -> None:
        where = f"{path}: " if path else ""
        super().__init__(f"{where}line {line}: expected {expected} fields, found {found}")
        self.line = line
        self.expected = expected
        self.found = found


class NotAValidInverse(InvalidInput):
    """Competitor matrix is not a left (classical) or right (high-dim) inverse."""


class AssumptionViolated(OlsInterpError):
    """A rank assumption (A1, B1 or B2) required by the operation fails."""

    exit_code = 3

    def __init__(self, message: str, assumption: str | None = None) -> None:
        super().__init__(message)
        self.assumption = assumption


class RegimeMismatch(AssumptionViolated):
    """The design is not in the regime the operation needs."""


class ConstantTreatment(AssumptionViolated):
    """Treatment vector carries no identifying variation."""


class NumericalFailure(OlsInterpError):
    """A denominator or pivot fell below the division tolerance."""

    exit_code = 4


class SingularSubmatrix(NumericalFailure):
    """The classical leave-k-out correction block is not invertible."""


class LeverageOne(NumericalFailure):
    """An observation has leverage numerically equal to one."""


class LemmaConditionsNotMet(NumericalFailure):
    """Preconditions of the rank-one pseudoinverse formula do not hold."""


class ZeroDegreesOfFreedom(NumericalFailure):
    """Variance estimator denominator is numerically zero."""
