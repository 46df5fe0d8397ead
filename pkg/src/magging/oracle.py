"""Population-level maximin machinery.

The maximin parameter of a finite support {b_1, ..., b_k} under covariance
S is the point of the support's convex hull closest to zero in the distance
d(u, v) = (u-v)'S(u-v).  Equivalently it maximises, over coefficient
vectors, the worst-case explained variance across the support; a brute
force grid search over that defining criterion serves as the independent
cross-check for the hull computation.

Also here: the a-posteriori certificate for the aggregation error of
magging, built from three empirical quantities of a fitted ensemble
against known group-level truths:

* worst per-group estimation error in the covariance norm,
* worst entry-wise deviation of the per-group Gram matrices from the
  population covariance,
* an l1 bound covering both true and estimated coefficient vectors.

The certified inequality is
``error <= 6 * estimation_error + 4 * gram_deviation * l1_bound**2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .aggregate import AggregationResult
from .errors import SolverError
from .estimators import Ensemble
from .linalg import check_covariance, gram, sigma_norm_sq
from .simplex_qp import DEFAULT_TOL, QpProblem, SimplexWeights, solve_simplex_qp

GRID_ORACLE_MAX_DIM = 3
GRID_RADIUS_FACTOR = 1.5
_GRID_CHUNK = 200_000


@dataclass(eq=False)
class SupportSpec:
    """Finite coefficient support plus the covariance defining the geometry."""

    points: np.ndarray   # (k, p)
    sigma: np.ndarray    # (p, p)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] < 1:
            raise ValueError("need at least one support point")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("support points contain non-finite entries")
        self.sigma = check_covariance(self.sigma, name="sigma")
        if self.sigma.shape[0] != self.points.shape[1]:
            raise ValueError(
                f"points have dimension {self.points.shape[1]}, "
                f"sigma is {self.sigma.shape[0]}x{self.sigma.shape[0]}"
            )

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def extended(self, new_point: np.ndarray) -> "SupportSpec":
        new_point = np.asarray(new_point, dtype=float).ravel()
        if new_point.size != self.p:
            raise ValueError("new point has the wrong dimension")
        return SupportSpec(np.vstack([self.points, new_point]), self.sigma)


def explained_variance(beta: np.ndarray, b: np.ndarray, sigma: np.ndarray) -> float:
    """Variance explained by predicting with `beta` when the truth is `b`:

    2 beta'Sb - beta'Sbeta.  Negative when beta points the wrong way.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    if beta.size != b.size or sigma.shape != (beta.size, beta.size):
        raise ValueError("dimension mismatch between beta, b, and sigma")
    return float(2.0 * beta @ sigma @ b - beta @ sigma @ beta)


def maximin_point(
    spec: SupportSpec,
    tol: float = DEFAULT_TOL,
    return_weights: bool = False,
) -> np.ndarray | tuple[np.ndarray, SimplexWeights]:
    """Minimum-covariance-norm point of the support's convex hull.

    Solved as a simplex-constrained QP on the k x k matrix of S-inner
    products of the support points; the returned point is the certified
    convex combination.
    """
    B = spec.points
    M = B @ spec.sigma @ B.T
    M = (M + M.T) / 2.0
    sol = solve_simplex_qp(QpProblem(M), tol=tol)
    point = sol.w @ B
    if return_weights:
        return point, sol
    return point


def maximin_point_grid(
    spec: SupportSpec,
    grid_step: float = 0.01,
    radius: float | None = None,
) -> np.ndarray:
    """Brute-force oracle: grid-minimise the worst-case negative explained
    variance over the support.

    Only for dimension <= 3.  Ties break to the lexicographically smallest
    grid point.  The default radius is 1.5x the largest coordinate of the
    support, and a radius smaller than the support extent is flagged since
    the hull then sticks out of the searched box.
    """
    if spec.p > GRID_ORACLE_MAX_DIM:
        raise ValueError(
            f"grid oracle limited to dimension {GRID_ORACLE_MAX_DIM}, got {spec.p}"
        )
    if not (grid_step > 0):
        raise ValueError("grid_step must be > 0")
    extent = float(np.max(np.abs(spec.points)))
    if radius is None:
        radius = max(GRID_RADIUS_FACTOR * extent, grid_step)
    if radius < extent:
        warnings.warn(
            f"grid radius {radius:g} is smaller than the support extent "
            f"{extent:g}; the searched box does not cover the hull",
            stacklevel=2,
        )
    steps = int(np.floor(2.0 * radius / grid_step + 1e-12))
    coords = -radius + grid_step * np.arange(steps + 1)
    cross_map = spec.sigma @ spec.points.T   # (p, k)

    def worst_case(block: np.ndarray) -> np.ndarray:
        quad = np.einsum("ij,jk,ik->i", block, spec.sigma, block)
        return quad - 2.0 * (block @ cross_map).min(axis=1)

    best_val = np.inf
    best_point: np.ndarray | None = None
    if spec.p == 1:
        grids = (coords[:, None],)
    elif spec.p == 2:
        a, b = np.meshgrid(coords, coords, indexing="ij")
        grids = (np.column_stack([a.ravel(), b.ravel()]),)
    else:
        tail_a, tail_b = np.meshgrid(coords, coords, indexing="ij")
        tail = np.column_stack([tail_a.ravel(), tail_b.ravel()])
        grids = (
            np.column_stack([np.full(tail.shape[0], c0), tail]) for c0 in coords
        )
    for block in grids:
        for start in range(0, block.shape[0], _GRID_CHUNK):
            chunk = block[start : start + _GRID_CHUNK]
            vals = worst_case(chunk)
            j = int(np.argmin(vals))
            if vals[j] < best_val:
                best_val = float(vals[j])
                best_point = chunk[j].copy()
    return best_point


def robustness_delta(
    spec: SupportSpec, new_point: np.ndarray, tol: float = DEFAULT_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Maximin points before and after appending one support point.

    Enlarging the hull can only move its minimum-norm point weakly towards
    zero; that is re-checked on the solver output and a violation beyond
    solver accuracy raises.
    """
    old = maximin_point(spec, tol=tol)
    grown = spec.extended(new_point)
    new = maximin_point(grown, tol=tol)
    old_sq = sigma_norm_sq(old, spec.sigma)
    new_sq = sigma_norm_sq(new, spec.sigma)
    scale = max(abs(float(np.trace(spec.sigma))), 1.0)
    if new_sq > old_sq + 10.0 * tol + 1e-12 * scale:
        raise SolverError(
            f"hull growth increased the minimum norm: {old_sq:.6e} -> {new_sq:.6e}"
        )
    return old, new


@dataclass(eq=False)
class BoundCertificate:
    """Empirical check of the aggregation-error bound.

    holds is `aggregate_error <= bound` up to a machine-precision allowance
    proportional to the bound's natural scale (so an exactly-zero bound is
    not failed by 1e-30 arithmetic residue).
    """

    estimation_error: float   # worst per-group ||theta_g - b_g||_S^2
    gram_deviation: float     # worst entry-wise |Gram_g - S|
    l1_bound: float           # covers ||b_g||_1 and ||theta_g||_1
    aggregate_error: float    # ||theta_aggr - maximin||_S^2
    bound: float              # 6*estimation_error + 4*gram_deviation*l1_bound^2
    holds: bool
    min_group_size: int

    def to_json_dict(self) -> dict:
        return {
            "estimation_error": float(self.estimation_error),
            "gram_deviation": float(self.gram_deviation),
            "l1_bound": float(self.l1_bound),
            "aggregate_error": float(self.aggregate_error),
            "bound": float(self.bound),
            "holds": bool(self.holds),
            "min_group_size": int(self.min_group_size),
        }


def error_bound_certificate(
    ens: Ensemble,
    spec: SupportSpec,
    result: AggregationResult,
    tol: float = DEFAULT_TOL,
) -> BoundCertificate:
    """Certify the aggregation error of `result` against known group truths.

    `spec.points` must hold one true coefficient vector per ensemble group
    (aligned by index) and `spec.sigma` the population covariance; the
    maximin target is assumed to lie in their convex hull, which holds by
    construction when the groups are the true ones.
    """
    if spec.k != ens.G:
        raise ValueError(
            f"support has {spec.k} points but the ensemble has {ens.G} groups"
        )
    if spec.p != ens.thetas.shape[1]:
        raise ValueError("support dimension does not match the ensemble")
    sigma = spec.sigma
    eta1 = max(
        sigma_norm_sq(ens.thetas[g] - spec.points[g], sigma) for g in range(ens.G)
    )
    eta2 = 0.0
    for idx in ens.grouping.groups:
        gram_g = gram(ens.design[idx], scale_by_n=True)
        eta2 = max(eta2, float(np.max(np.abs(gram_g - sigma))))
    kappa = max(
        float(np.max(np.abs(spec.points).sum(axis=1))),
        float(np.max(np.abs(ens.thetas).sum(axis=1))),
    )
    target = maximin_point(spec, tol=tol)
    lhs = sigma_norm_sq(np.asarray(result.theta) - target, sigma)
    bound = 6.0 * eta1 + 4.0 * eta2 * kappa**2
    sigma_scale = float(np.max(np.abs(sigma))) if sigma.size else 0.0
    slack = 1e-10 * (1.0 + kappa**2 * sigma_scale)
    return BoundCertificate(
        estimation_error=eta1,
        gram_deviation=eta2,
        l1_bound=kappa,
        aggregate_error=lhs,
        bound=bound,
        holds=bool(lhs <= bound + slack),
        min_group_size=min(ens.grouping.sizes),
    )
