"""Maximin aggregation (magging) for heterogeneous regression data.

Workflow: build groups over the samples, fit one regression per group,
then aggregate the ensemble — by averaging, by stacking against the
response, or by magging, which picks the convex combination of smallest
fitted-value norm and thereby keeps only effects common to all groups.
Population-level maximin geometry and an empirical estimation-error
certificate live in `oracle`; synthetic scenario generators in `simulate`.
"""

from .aggregate import (
    AggregationResult,
    StackingConfig,
    leaveout_fitted,
    magging,
    mean_aggregate,
    predict,
    stacked_aggregate,
)
from .errors import (
    ConvergenceWarning,
    EstimatorError,
    InputError,
    MaggingError,
    SingularDesignError,
    SolverError,
)
from .estimators import (
    Ensemble,
    EstimatorSpec,
    default_lasso_penalty,
    fit_ensemble,
    fit_group,
    fit_pooled,
)
from .groups import (
    Grouping,
    consecutive_blocks,
    known_groups,
    random_subsample,
)
from .linalg import gram, project_simplex, sigma_norm_sq
from .oracle import (
    BoundCertificate,
    SupportSpec,
    error_bound_certificate,
    explained_variance,
    maximin_point,
    maximin_point_grid,
    robustness_delta,
)
from .simplex_qp import QpProblem, SimplexWeights, duality_gap, solve_simplex_qp
from .simulate import (
    MixtureSimConfig,
    PeriodicSimConfig,
    SimOutput,
    simulate_mixture,
    simulate_periodic,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationResult",
    "BoundCertificate",
    "ConvergenceWarning",
    "Ensemble",
    "EstimatorError",
    "EstimatorSpec",
    "Grouping",
    "InputError",
    "MaggingError",
    "MixtureSimConfig",
    "PeriodicSimConfig",
    "QpProblem",
    "SimOutput",
    "SimplexWeights",
    "SingularDesignError",
    "SolverError",
    "StackingConfig",
    "SupportSpec",
    "consecutive_blocks",
    "default_lasso_penalty",
    "duality_gap",
    "error_bound_certificate",
    "explained_variance",
    "fit_ensemble",
    "fit_group",
    "fit_pooled",
    "gram",
    "known_groups",
    "leaveout_fitted",
    "magging",
    "maximin_point",
    "maximin_point_grid",
    "mean_aggregate",
    "predict",
    "project_simplex",
    "random_subsample",
    "robustness_delta",
    "sigma_norm_sq",
    "simulate_mixture",
    "simulate_periodic",
    "solve_simplex_qp",
    "stacked_aggregate",
]
