"""Dense vector/matrix primitives: Gram matrices, covariance-weighted norms,
and Euclidean projection onto the probability simplex.

Everything here is pure and operates on plain float64 ndarrays.
"""

from __future__ import annotations

import numpy as np

# Tolerances used when validating covariance-like matrices.  Gram matrices of
# rank-deficient designs routinely carry eigenvalues around -1e-14 * trace, so
# the PSD check leaves floating-point headroom.
SYMMETRY_RTOL = 1e-12
PSD_TOL = 1e-10


def gram(X: np.ndarray, scale_by_n: bool = False) -> np.ndarray:
    """Cross-product matrix X'X, divided by the row count when `scale_by_n`.

    The result is exactly symmetric element-wise (symmetrised after the
    product, since BLAS does not guarantee it).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d design matrix, got shape {X.shape}")
    M = X.T @ X
    if scale_by_n:
        M /= X.shape[0]
    return (M + M.T) / 2.0


def sigma_norm_sq(v: np.ndarray, S: np.ndarray) -> float:
    """Quadratic form v'Sv, clamped to zero against roundoff.

    For PSD `S` the true value is nonnegative; values slightly below zero
    (within -PSD_TOL * ||v||^2 * trace(S)) are treated as roundoff and
    clamped, anything lower raises.
    """
    v = np.asarray(v, dtype=float).ravel()
    S = np.asarray(S, dtype=float)
    if S.shape != (v.size, v.size):
        raise ValueError(f"dimension mismatch: v has {v.size}, S has shape {S.shape}")
    val = float(v @ S @ v)
    if val >= 0.0:
        return val
    floor = -PSD_TOL * float(v @ v) * abs(float(np.trace(S)))
    if val < floor:
        raise ValueError(
            f"quadratic form {val:.3e} below the PSD roundoff floor {floor:.3e}; "
            "matrix is not positive semi-definite"
        )
    return 0.0


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w_g >= 0, sum_g w_g = 1}.

    Sort-and-threshold method, O(G log G).  Inputs already in the simplex
    project to themselves (up to the exact threshold arithmetic).
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project non-finite values")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def check_covariance(S: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Validate a covariance-like matrix and return its symmetrised copy.

    Requires: square, finite, symmetric within SYMMETRY_RTOL (relative to the
    largest entry), eigenvalues >= -PSD_TOL * trace.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"{name} must be square, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError(f"{name} contains non-finite entries")
    scale = float(np.max(np.abs(S))) if S.size else 0.0
    asym = float(np.max(np.abs(S - S.T))) if S.size else 0.0
    if asym > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ValueError(f"{name} is not symmetric: max |S - S'| = {asym:.3e}")
    Ssym = (S + S.T) / 2.0
    if Ssym.size:
        evmin = float(np.linalg.eigvalsh(Ssym)[0])
        trace = float(np.trace(Ssym))
        if evmin < -PSD_TOL * max(trace, 0.0):
            raise ValueError(
                f"{name} is not positive semi-definite: min eigenvalue {evmin:.3e}"
            )
    return Ssym
