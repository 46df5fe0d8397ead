"""Quadratic minimisation over the probability simplex.

Solves min_{w in C_G} w'Hw + 2 q'w for PSD H, where C_G is the set of
nonnegative weight vectors summing to one.  The linear term q covers the
residual-fit variant used by stacked aggregation; plain minimum-norm
problems leave it unset.

Algorithm: accelerated projected gradient (with adaptive restart) at step
size 1/L, L taken from the Gershgorin bound on 2H.  A tiny ridge xi*I is
always added so that among multiple minimisers the iterates approach the
one of least Euclidean norm; xi is reported back to the caller.  Iterates
are periodically "polished" by solving the KKT system restricted to the
current active face, which brings the certificate down to machine
precision once the right face is found.  The linear-minimisation
(Frank-Wolfe) gap over the simplex is the stopping certificate: it upper
bounds the suboptimality of a feasible point and vanishes exactly at the
optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError
from .linalg import check_covariance, project_simplex

DEFAULT_TOL = 1e-9
MAX_ITERATIONS = 1_000_000
POLISH_EVERY = 50

# Ridge used for the least-norm tie-break: max(RIDGE_FLOOR, RIDGE_SCALE * trace H),
# capped at tol/8 -- at the ridged optimum the gap of the unridged problem can
# lag by about 2*xi, so a larger ridge would make the certificate unreachable.
RIDGE_FLOOR = 1e-10
RIDGE_SCALE = 1e-12
RIDGE_TOL_FRACTION = 0.125


@dataclass(eq=False)
class QpProblem:
    """G x G PSD matrix H plus an optional linear coefficient vector q.

    The objective is w'Hw + 2 q'w.
    """

    H: np.ndarray
    linear: np.ndarray | None = None

    def __post_init__(self):
        self.H = check_covariance(self.H, name="H")
        if self.linear is not None:
            self.linear = np.asarray(self.linear, dtype=float).ravel()
            if self.linear.size != self.H.shape[0]:
                raise ValueError(
                    f"linear term has length {self.linear.size}, H is "
                    f"{self.H.shape[0]}x{self.H.shape[0]}"
                )
            if not np.all(np.isfinite(self.linear)):
                raise ValueError("linear term contains non-finite entries")

    @property
    def G(self) -> int:
        return self.H.shape[0]

    def linear2(self) -> np.ndarray:
        """Coefficient of w in the gradient convention: 2q (zeros if absent)."""
        if self.linear is None:
            return np.zeros(self.G)
        return 2.0 * self.linear

    def objective(self, w: np.ndarray) -> float:
        return float(w @ (self.H @ w) + self.linear2() @ w)


@dataclass(eq=False)
class SimplexWeights:
    """Solver output: feasible weights plus the optimality certificate."""

    w: np.ndarray
    objective: float
    iterations: int
    regularization_used: float
    gap: float = field(default=0.0)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float).ravel()


def duality_gap(prob: QpProblem, w: np.ndarray) -> float:
    """Linear-minimisation gap of feasible w over the simplex.

    gap(w) = grad(w)'w - min_g grad(w)_g >= f(w) - f(w*); zero exactly at
    an optimum (up to floating point, hence the clamp at zero).
    """
    w = np.asarray(w, dtype=float).ravel()
    if w.size != prob.G:
        raise ValueError(f"w has length {w.size}, H is {prob.G}x{prob.G}")
    if w.min() < -1e-9 or abs(w.sum() - 1.0) > 1e-8:
        raise ValueError("w is not in the probability simplex")
    return _fw_gap(prob.H, prob.linear2(), w)


def _fw_gap(M: np.ndarray, q2: np.ndarray, w: np.ndarray) -> float:
    grad = 2.0 * (M @ w) + q2
    return max(float(grad @ w - grad.min()), 0.0)


def _face_polish(Ht: np.ndarray, q2: np.ndarray, w: np.ndarray) -> np.ndarray | None:
    """Exact optimum of the ridged objective on the face spanned by supp(w).

    Returns None if the KKT solve fails or leaves the face (negative weight
    beyond roundoff).
    """
    support = np.flatnonzero(w > 1e-12)
    k = support.size
    if k == 0:
        return None
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * Ht[np.ix_(support, support)]
    kkt[:k, k] = -1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([-q2[support], [1.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    ws = sol[:k]
    if ws.min() < -1e-9:
        return None
    ws = np.maximum(ws, 0.0)
    total = ws.sum()
    if total <= 0.0 or not np.isfinite(total):
        return None
    full = np.zeros(w.size)
    full[support] = ws / total
    return full


def solve_simplex_qp(
    prob: QpProblem,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_ITERATIONS,
) -> SimplexWeights:
    """Minimise w'Hw + 2 q'w over the probability simplex.

    Returns weights whose Frank-Wolfe gap (for the problem as given) is at
    most `tol`; raises SolverError if the certificate is not reached within
    `max_iterations`.
    """
    if not (tol > 0):
        raise ValueError("tol must be > 0")
    H = prob.H
    q2 = prob.linear2()
    G = prob.G
    if G == 1:
        w = np.ones(1)
        return SimplexWeights(
            w=w, objective=prob.objective(w), iterations=0,
            regularization_used=0.0, gap=0.0,
        )

    xi = min(
        max(RIDGE_FLOOR, RIDGE_SCALE * float(np.trace(H))),
        RIDGE_TOL_FRACTION * tol,
    )
    Ht = H + xi * np.eye(G)
    L = 2.0 * float(np.max(np.sum(np.abs(Ht), axis=1)))
    L = max(L, 1e-300)

    def ft(w: np.ndarray) -> float:
        return float(w @ (Ht @ w) + q2 @ w)

    w = np.full(G, 1.0 / G)
    fw = ft(w)
    y = w
    t = 1.0

    gap_raw = _fw_gap(H, q2, w)
    gap_ridge = _fw_gap(Ht, q2, w)
    if max(gap_raw, gap_ridge) <= tol:
        return SimplexWeights(
            w=w, objective=prob.objective(w), iterations=0,
            regularization_used=xi, gap=gap_raw,
        )

    for it in range(1, max_iterations + 1):
        grad_y = 2.0 * (Ht @ y) + q2
        cand = project_simplex(y - grad_y / L)
        f_cand = ft(cand)
        if f_cand > fw:
            # Momentum overshoot: restart from the last iterate.
            t = 1.0
            grad_w = 2.0 * (Ht @ w) + q2
            cand = project_simplex(w - grad_w / L)
            f_cand = ft(cand)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = cand + ((t - 1.0) / t_next) * (cand - w)
        w, fw, t = cand, f_cand, t_next

        if it % POLISH_EVERY == 0:
            polished = _face_polish(Ht, q2, w)
            if polished is not None:
                f_pol = ft(polished)
                if f_pol <= fw:
                    w, fw = polished, f_pol
                    y = w
                    t = 1.0

        gap_raw = _fw_gap(H, q2, w)
        if gap_raw <= tol and _fw_gap(Ht, q2, w) <= tol:
            return SimplexWeights(
                w=np.maximum(w, 0.0), objective=prob.objective(w),
                iterations=it, regularization_used=xi, gap=gap_raw,
            )

    raise SolverError(
        f"no certificate after {max_iterations} iterations: "
        f"gap {gap_raw:.3e} > tol {tol:.3e} (G={G}, ridge={xi:.3e})"
    )
