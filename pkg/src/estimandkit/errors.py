"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class EstimandKitError(Exception):
    exit_code = 4


class ValidationError(EstimandKitError, ValueError):
    """Bad input data, configuration or parameters."""

    exit_code = 2


class IncompatibleEstimandError(EstimandKitError, ValueError):
    """A method was asked to target an estimand it cannot target."""

    exit_code = 3


class SolverError(EstimandKitError, RuntimeError):
    """A numerical routine failed (non-convergence, rank deficiency, separation)."""

    exit_code = 4


class RankDeficiencyError(SolverError):
    pass


class PerfectSeparationError(SolverError):
    pass


class EstimandRelabelWarning(UserWarning):
    """Raised when a restriction changes the estimand a method targets."""
