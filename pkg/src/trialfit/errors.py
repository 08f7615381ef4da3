"""Exception types shared across the package."""


class TrialfitError(Exception):
    """Base class for all domain errors."""


class EmptyCriteria(TrialfitError):
    """Raised when a trial has no non-empty criteria section."""


class UnparsableBound(TrialfitError):
    """Raised when a bound expression contains no parsable number.

    Carries the offending raw text as ``.raw``.
    """

    def __init__(self, raw: str, detail: str = "no parsable number"):
        self.raw = raw
        super().__init__(f"{detail}: {raw!r}")


class UnknownUnit(TrialfitError):
    """Raised when a (variable, unit) pair is missing from the conversion table."""

    def __init__(self, variable: str, unit: str):
        self.variable = variable
        self.unit = unit
        super().__init__(f"no conversion for unit {unit!r} of variable {variable!r}")


class MissingULN(TrialfitError):
    """Raised when a variable has no upper-limit-of-normal entry."""

    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"no ULN configured for variable {variable!r}")


class IngestError(TrialfitError):
    """Raised on unrecoverable input-file problems (carries line number when known)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidParameter(TrialfitError):
    """Raised on out-of-domain arguments (e.g. top_k <= 0, empty ICD prefix)."""


class EmptyTargetCohort(TrialfitError):
    """Raised when a generalizability score is requested for an empty target cohort."""


class InvalidScenario(TrialfitError):
    """Raised when scenario overrides produce an inconsistent criteria set."""


class IncomparableScenarios(TrialfitError):
    """Raised when reports over different target cohorts are compared."""


class ConfigError(TrialfitError):
    """Raised on invalid synthetic-population configuration."""
