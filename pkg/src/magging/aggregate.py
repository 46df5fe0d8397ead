"""Aggregation of a fitted ensemble into a single coefficient vector.

Three schemes:

* mean aggregation: uniform weights 1/G;
* stacked aggregation: weights minimise the residual to the response over a
  constraint set (ridge ball / nonnegative orthant / simplex), using
  leave-one-out or out-of-bag predictions so members are not scored on
  their own training samples;
* magging: convex weights minimising the norm of the aggregated fitted
  values. The response never enters, so common effects survive while
  group-specific ones cancel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import SolverError
from .estimators import Ensemble, fit_group
from .simplex_qp import DEFAULT_TOL, QpProblem, solve_simplex_qp

SCHEME_MEAN = "mean"
SCHEME_MAGGING = "magging"
CONSTRAINT_CONVEX = "convex"
CONSTRAINT_SIGN = "sign"
CONSTRAINT_RIDGE = "ridge"
LEAVEOUT_LOO = "loo"
LEAVEOUT_OOB = "oob"


@dataclass(frozen=True)
class StackingConfig:
    """Constraint set and leave-out scheme for stacked aggregation."""

    constraint: str = CONSTRAINT_CONVEX
    radius: float | None = None
    leaveout: str = LEAVEOUT_LOO

    def __post_init__(self):
        if self.constraint not in (CONSTRAINT_CONVEX, CONSTRAINT_SIGN, CONSTRAINT_RIDGE):
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if self.leaveout not in (LEAVEOUT_LOO, LEAVEOUT_OOB):
            raise ValueError(f"unknown leave-out scheme {self.leaveout!r}")
        if self.constraint == CONSTRAINT_RIDGE:
            if self.radius is None or not (self.radius > 0):
                raise ValueError("ridge constraint needs a radius > 0")
        elif self.radius is not None:
            raise ValueError("radius only applies to the ridge constraint")

    def scheme_label(self) -> str:
        if self.constraint == CONSTRAINT_RIDGE:
            return f"stack:ridge:{self.radius:g}:{self.leaveout}"
        return f"stack:{self.constraint}:{self.leaveout}"


@dataclass(eq=False)
class AggregationResult:
    """theta = sum_g weights_g * theta_g, plus solver diagnostics."""

    theta: np.ndarray
    weights: np.ndarray
    scheme: str
    diagnostics: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "weights": [float(v) for v in self.weights],
            "theta": [float(v) for v in self.theta],
            "diagnostics": {k: float(v) for k, v in sorted(self.diagnostics.items())},
        }


def predict(theta: np.ndarray, X_new: np.ndarray) -> np.ndarray:
    """Fitted values X_new @ theta."""
    theta = np.asarray(theta, dtype=float).ravel()
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != theta.size:
        raise ValueError(
            f"dimension mismatch: design {X_new.shape} vs coefficients {theta.size}"
        )
    return X_new @ theta


def mean_aggregate(ens: Ensemble) -> AggregationResult:
    """Uniform weights 1/G (bagging-style averaging)."""
    if ens.G < 1:
        raise ValueError("empty ensemble")
    w = np.full(ens.G, 1.0 / ens.G)
    return AggregationResult(theta=w @ ens.thetas, weights=w, scheme=SCHEME_MEAN)


def magging(ens: Ensemble, tol: float = DEFAULT_TOL) -> AggregationResult:
    """Convex weights minimising the norm of the aggregated fitted values.

    Only the pairwise inner products of the per-group fitted vectors enter;
    the response plays no role.  If every fitted vector is zero, any w is
    optimal and the least-norm tie-break gives uniform weights (flagged in
    the diagnostics).
    """
    if ens.G < 1:
        raise ValueError("empty ensemble")
    F = ens.fitted
    H = F @ F.T
    H = (H + H.T) / 2.0
    if float(np.trace(H)) == 0.0:
        w = np.full(ens.G, 1.0 / ens.G)
        return AggregationResult(
            theta=w @ ens.thetas, weights=w, scheme=SCHEME_MAGGING,
            diagnostics={"objective": 0.0, "gap": 0.0, "ridge": 0.0,
                         "degenerate": 1.0},
        )
    sol = solve_simplex_qp(QpProblem(H), tol=tol)
    return AggregationResult(
        theta=sol.w @ ens.thetas, weights=sol.w, scheme=SCHEME_MAGGING,
        diagnostics={
            "objective": sol.objective,
            "gap": sol.gap,
            "ridge": sol.regularization_used,
            "iterations": float(sol.iterations),
        },
    )


def leaveout_fitted(ens: Ensemble, Y: np.ndarray, leaveout: str) -> np.ndarray:
    """(n, G) matrix of member predictions not trained on the scored sample.

    loo: column g at row i in G_g holds the prediction from refitting group
    g without sample i (full fit elsewhere).  oob: rows inside the member's
    own group are zeroed instead of refit.
    """
    X = ens.design
    Y = np.asarray(Y, dtype=float).ravel()
    F = X @ ens.thetas.T
    for g, idx in enumerate(ens.grouping.groups):
        if leaveout == LEAVEOUT_OOB:
            F[idx, g] = 0.0
            continue
        for i in idx:
            rows = idx[idx != i]
            try:
                theta_i = fit_group(X[rows], Y[rows], ens.spec)
            except Exception as e:
                raise type(e)(
                    f"leave-one-out refit failed for group {g}, sample {int(i)}: {e}"
                ) from e
            F[i, g] = X[i] @ theta_i
    return F


def _norm_capped_lstsq(
    F: np.ndarray, Y: np.ndarray, radius: float
) -> tuple[np.ndarray, float]:
    """Least squares with ||w||_2 <= radius via bisection on the multiplier.

    Interior solutions are returned as-is (multiplier 0); otherwise the
    boundary solution w(mu) = (F'F + mu I)^-1 F'Y with ||w(mu)|| = radius.
    """
    w_ls, *_ = np.linalg.lstsq(F, Y, rcond=None)
    if float(np.linalg.norm(w_ls)) <= radius:
        return w_ls, 0.0
    FtF = F.T @ F
    FtY = F.T @ Y
    eye = np.eye(F.shape[1])

    def w_of(mu: float) -> np.ndarray:
        return np.linalg.solve(FtF + mu * eye, FtY)

    lo, hi = 0.0, 1.0
    for _ in range(200):
        if float(np.linalg.norm(w_of(hi))) < radius:
            break
        hi *= 2.0
    else:
        raise SolverError("ridge-constrained stacking: multiplier search failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.linalg.norm(w_of(mid))) > radius:
            lo = mid
        else:
            hi = mid
    w = w_of(hi)
    return w, hi


def stacked_aggregate(
    ens: Ensemble,
    Y: np.ndarray,
    cfg: StackingConfig,
    tol: float = DEFAULT_TOL,
) -> AggregationResult:
    """Weights minimising ||Y - F w||_2 over the configured constraint set,

    where F holds the leave-out member predictions.
    """
    if ens.G < 1:
        raise ValueError("empty ensemble")
    Y = np.asarray(Y, dtype=float).ravel()
    if Y.size != ens.design.shape[0]:
        raise ValueError(
            f"response has {Y.size} entries, design has {ens.design.shape[0]} rows"
        )
    F = leaveout_fitted(ens, Y, cfg.leaveout)
    diagnostics: dict[str, float] = {}
    if cfg.constraint == CONSTRAINT_CONVEX:
        H = F.T @ F
        H = (H + H.T) / 2.0
        sol = solve_simplex_qp(QpProblem(H, linear=-(F.T @ Y)), tol=tol)
        w = sol.w
        diagnostics.update(
            gap=sol.gap, ridge=sol.regularization_used,
            iterations=float(sol.iterations),
        )
    elif cfg.constraint == CONSTRAINT_SIGN:
        w, _ = scipy.optimize.nnls(F, Y)
    else:
        w, mu = _norm_capped_lstsq(F, Y, cfg.radius)
        diagnostics["multiplier"] = mu
    diagnostics["residual"] = float(np.linalg.norm(Y - F @ w))
    return AggregationResult(
        theta=w @ ens.thetas, weights=np.asarray(w, dtype=float),
        scheme=cfg.scheme_label(), diagnostics=diagnostics,
    )
