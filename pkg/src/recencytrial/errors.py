"""Exception hierarchy shared by all modules."""


class RecencyTrialError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RecencyTrialError, ValueError):
    """An input violates a documented invariant."""


class DomainError(ValidationError):
    """A numeric argument lies outside the domain of a function."""


class EstimationError(RecencyTrialError, ArithmeticError):
    """An estimator is undefined for the supplied counts."""


class ZeroEstimateError(EstimationError):
    """Zero recent infections or zero trial events; the log-estimate is undefined."""


class NonPositiveEstimateError(EstimationError):
    """Recent count does not exceed the expected number of false recents."""


class DegenerateCountsError(EstimationError):
    """A denominator count (N-, N+) is zero."""


class DegenerateVarianceError(EstimationError):
    """The log-ratio variance is zero, so Z and the interval are undefined."""


class InfeasibleContextError(ValidationError):
    """Design parameters imply a recency probability outside (0, 1)."""


class UnsupportedContextError(ValidationError):
    """The requested calculation is only defined for zero assay uncertainty."""


class InfeasibleDesignError(RecencyTrialError):
    """No screening sample size attains the requested power.

    Attributes
    ----------
    boundary : float
        Largest log R1 for which the design is attainable.
    log_r1 : float
        The requested log R1.
    """

    def __init__(self, message, boundary, log_r1):
        super().__init__(message)
        self.boundary = boundary
        self.log_r1 = log_r1


class SimulationError(RecencyTrialError):
    """Every replicate of a Monte Carlo study was degenerate."""


class ConfigError(ValidationError):
    """A configuration file could not be parsed or validated."""

    def __init__(self, message, line=None, field=None, source=None):
        self.line = line
        self.field = field
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
