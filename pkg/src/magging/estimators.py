"""Per-group and pooled regression estimators: OLS, ridge, and lasso.

All fits are interceptless, matching the mixture model the package targets.
Intercept/standardisation are handled upstream as design-matrix
preprocessing (see dataio) rather than inside the estimators.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, SingularDesignError
from .groups import Grouping

OLS = "ols"
RIDGE = "ridge"
LASSO = "lasso"
KINDS = (OLS, RIDGE, LASSO)

# OLS refuses designs whose normal-equation condition number reaches this;
# silent pseudo-inverses would corrupt downstream error certificates.
MAX_CONDITION = 1e12

THREADS_ENV_VAR = "MAGGING_THREADS"


def worker_count() -> int:
    """Parallelism cap from the MAGGING_THREADS variable (0 = auto).

    Unset or 1 means sequential execution.
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if k < 0:
        raise ValueError(f"{THREADS_ENV_VAR} must be >= 0")
    if k == 0:
        return os.cpu_count() or 1
    return k


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run per group, and its convergence knobs.

    `lam` is the penalty level for ridge/lasso.  For lasso, `lam=None`
    selects the default rule sd(Y_g) * sqrt(log(p) / |G_g|) per group.
    """

    kind: str = LASSO
    lam: float | None = None
    tolerance: float = 1e-8
    max_iterations: int = 100_000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.lam is not None and not (self.lam >= 0):
            raise ValueError("penalty must be >= 0")
        if self.kind == RIDGE and self.lam is None:
            raise ValueError("ridge requires an explicit penalty")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @classmethod
    def ols(cls, **kw) -> "EstimatorSpec":
        return cls(kind=OLS, **kw)

    @classmethod
    def ridge(cls, lam: float, **kw) -> "EstimatorSpec":
        return cls(kind=RIDGE, lam=lam, **kw)

    @classmethod
    def lasso(cls, lam: float | None = None, **kw) -> "EstimatorSpec":
        return cls(kind=LASSO, lam=lam, **kw)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lam": self.lam,
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
        }


def default_lasso_penalty(Y: np.ndarray, p: int) -> float:
    """Default lasso level: sd(Y) * sqrt(log(p) / n)."""
    Y = np.asarray(Y, dtype=float).ravel()
    if Y.size < 2 or p < 2:
        return 0.0
    return float(np.std(Y, ddof=1)) * math.sqrt(math.log(p) / Y.size)


def _soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def _fit_ols(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    XtX = X.T @ X
    cond = np.linalg.cond(XtX)
    if not np.isfinite(cond) or cond >= MAX_CONDITION:
        raise SingularDesignError(
            f"normal equations condition number {cond:.3e} >= {MAX_CONDITION:.0e}; "
            "use ridge or lasso"
        )
    return np.linalg.solve(XtX, X.T @ Y)


def _fit_ridge(X: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    n = X.shape[0]
    A = X.T @ X + lam * n * np.eye(X.shape[1])
    try:
        return np.linalg.solve(A, X.T @ Y)
    except np.linalg.LinAlgError as e:
        raise SingularDesignError(f"ridge system singular: {e}") from e


def _fit_lasso(X: np.ndarray, Y: np.ndarray, spec: EstimatorSpec) -> np.ndarray:
    """Cyclic coordinate descent on (2n)^-1 ||Y - X theta||^2 + lam ||theta||_1."""
    n, p = X.shape
    lam = spec.lam if spec.lam is not None else default_lasso_penalty(Y, p)
    col_sq = np.einsum("ij,ij->j", X, X) / n
    theta = np.zeros(p)
    resid = Y.astype(float).copy()
    for _ in range(spec.max_iterations):
        delta = 0.0
        for j in range(p):
            cj = col_sq[j]
            if cj == 0.0:
                continue
            old = theta[j]
            rho = float(X[:, j] @ resid) / n + cj * old
            new = _soft_threshold(rho, lam) / cj
            if new != old:
                resid -= (new - old) * X[:, j]
                theta[j] = new
                delta = max(delta, abs(new - old))
        if delta < spec.tolerance:
            return theta
    warnings.warn(
        f"lasso stopped after {spec.max_iterations} sweeps with max coefficient "
        f"change {delta:.3e} >= tolerance {spec.tolerance:.3e}",
        ConvergenceWarning,
    )
    return theta


def fit_group(X_g: np.ndarray, Y_g: np.ndarray, spec: EstimatorSpec) -> np.ndarray:
    """Fit one group's coefficient vector according to `spec`."""
    X_g = np.asarray(X_g, dtype=float)
    Y_g = np.asarray(Y_g, dtype=float).ravel()
    if X_g.ndim != 2:
        raise ValueError(f"expected a 2-d design, got shape {X_g.shape}")
    if X_g.shape[0] != Y_g.size:
        raise ValueError(
            f"row count mismatch: X has {X_g.shape[0]}, Y has {Y_g.size}"
        )
    if not (np.all(np.isfinite(X_g)) and np.all(np.isfinite(Y_g))):
        raise ValueError("non-finite values in the training data")
    if spec.kind == OLS:
        return _fit_ols(X_g, Y_g)
    if spec.kind == RIDGE:
        return _fit_ridge(X_g, Y_g, spec.lam)
    return _fit_lasso(X_g, Y_g, spec)


@dataclass(eq=False)
class Ensemble:
    """Per-group coefficients plus their fitted values on a reference design.

    `fitted[g] == design @ thetas[g]` row for row; the design is kept so that
    downstream consumers (weight solvers, certificates) can form per-group
    Gram matrices without refitting.
    """

    thetas: np.ndarray   # (G, p)
    fitted: np.ndarray   # (G, n)
    grouping: Grouping
    spec: EstimatorSpec
    design: np.ndarray   # (n, p)

    @property
    def G(self) -> int:
        return self.thetas.shape[0]

    def check(self, rtol: float = 1e-10) -> None:
        """Verify the fitted-value invariant (used by the test suite)."""
        expect = self.thetas @ self.design.T
        scale = max(float(np.max(np.abs(expect))), 1.0)
        if float(np.max(np.abs(self.fitted - expect))) > rtol * scale:
            raise AssertionError("fitted values do not match design @ thetas")


def fit_ensemble(
    X: np.ndarray, Y: np.ndarray, grouping: Grouping, spec: EstimatorSpec
) -> Ensemble:
    """Fit every group and evaluate each fit on the full design.

    Groups may be fitted in parallel (MAGGING_THREADS); results are
    assembled by group index, so the output is identical to a sequential
    run.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if grouping.n != X.shape[0]:
        raise ValueError(
            f"grouping covers {grouping.n} samples but design has {X.shape[0]} rows"
        )

    def fit_one(g: int) -> np.ndarray:
        idx = grouping.groups[g]
        try:
            return fit_group(X[idx], Y[idx], spec)
        except Exception as e:
            raise type(e)(f"group {g}: {e}") from e

    workers = worker_count()
    if workers > 1 and grouping.G > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            thetas = list(pool.map(fit_one, range(grouping.G)))
    else:
        thetas = [fit_one(g) for g in range(grouping.G)]
    thetas = np.vstack(thetas)
    return Ensemble(
        thetas=thetas,
        fitted=thetas @ X.T,
        grouping=grouping,
        spec=spec,
        design=X,
    )


def fit_pooled(X: np.ndarray, Y: np.ndarray, spec: EstimatorSpec) -> np.ndarray:
    """Single fit on all samples at once."""
    return fit_group(X, Y, spec)
