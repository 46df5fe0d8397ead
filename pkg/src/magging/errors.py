"""Exception and warning types shared across the package."""


class MaggingError(Exception):
    """Base class for errors raised by this package."""


class InputError(MaggingError):
    """Malformed input data or configuration (CLI exit code 2)."""


class EstimatorError(MaggingError):
    """Per-group or pooled estimation failed (CLI exit code 3)."""


class SingularDesignError(EstimatorError):
    """Design matrix too ill-conditioned for a plain least-squares fit."""


class SolverError(MaggingError):
    """Weight optimisation failed to certify a solution (CLI exit code 4)."""


class ConvergenceWarning(UserWarning):
    """Iterative fit stopped at the iteration cap before reaching tolerance."""
