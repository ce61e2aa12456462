"""Exception types raised across the package."""

from __future__ import annotations


class LogitDemandError(Exception):
    """Base class for all package errors."""


# --- linear algebra ---------------------------------------------------------


class RankDeficientError(LogitDemandError):
    """Design matrix is numerically rank deficient (perfect multicollinearity)."""

    def __init__(self, columns, message=None):
        self.columns = tuple(columns)
        super().__init__(
            message or f"matrix is rank deficient; dependent columns: {list(self.columns)}"
        )


class NotPositiveDefiniteError(LogitDemandError):
    """A symmetric matrix failed a Cholesky pivot (not positive definite)."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"leading minor of order {index + 1} is not positive definite")


# --- demand / shares --------------------------------------------------------


class ZeroQuantityError(LogitDemandError):
    """A product sold zero units; its log share is undefined."""


class OutsideShareNonPositiveError(LogitDemandError):
    """Total quantity meets or exceeds market size, leaving no outside share."""


# --- estimation -------------------------------------------------------------


class InsufficientObservationsError(LogitDemandError):
    """Fewer usable rows than estimated coefficients."""


class CollinearWithFixedEffectsError(LogitDemandError):
    """A regressor is absorbed by the unit/period dummies."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(
            message or f"regressor {column!r} is collinear with the fixed-effect dummies"
        )


class OrderConditionViolatedError(LogitDemandError):
    """Fewer instruments than endogenous regressors (m < k)."""


# --- diagnostics ------------------------------------------------------------


class MultipleEndogenousError(LogitDemandError):
    """The first-stage F test supports exactly one endogenous regressor."""


class ExactlyIdentifiedError(LogitDemandError):
    """Over-identification test is undefined when m = k."""


# --- data ingestion ---------------------------------------------------------


class ParseError(LogitDemandError):
    """Malformed CSV cell or structure."""

    def __init__(self, line, column, message):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column!r}: {message}")


class DuplicateKeyError(LogitDemandError):
    """The same (unit, period) pair appears twice."""

    def __init__(self, unit, period):
        self.unit = unit
        self.period = period
        super().__init__(f"duplicate row for unit {unit!r}, period {period}")


class DomainViolationError(LogitDemandError):
    """A cell value violates the column's domain."""

    def __init__(self, column, row, reason):
        self.column = column
        self.row = row
        super().__init__(f"column {column!r}, row {row}: {reason}")


# --- model-spec files -------------------------------------------------------


class UnknownKeyError(LogitDemandError):
    """Spec file contains a key outside the schema."""


class MissingRequiredError(LogitDemandError):
    """Spec file lacks a required field."""

    def __init__(self, field):
        self.field = field
        super().__init__(f"spec is missing required field {field!r}")


class UnknownColumnError(LogitDemandError):
    """Spec file references a column absent from the dataset."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"spec references unknown column {name!r}")


# --- simulation -------------------------------------------------------------


class DegenerateSharesError(LogitDemandError):
    """Simulated market produced a vanishing share even after re-draws."""
