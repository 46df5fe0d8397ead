"""Shared test utilities: random problem generators and brute-force oracles."""

from __future__ import annotations

import numpy as np


def random_psd(rng: np.random.Generator, k: int, jitter: float = 0.0) -> np.ndarray:
    """Random PSD matrix A'A (+ jitter * I), exactly symmetric."""
    A = rng.standard_normal((k, k))
    M = A.T @ A + jitter * np.eye(k)
    return (M + M.T) / 2.0


def random_conditioned_psd(
    rng: np.random.Generator, k: int, lo: float = 1.0, hi: float = 2.0
) -> np.ndarray:
    """Random PSD matrix with eigenvalues uniform in [lo, hi]."""
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    S = (Q * rng.uniform(lo, hi, k)) @ Q.T
    return (S + S.T) / 2.0


def vertex_optimum_support(rng: np.random.Generator):
    """(points, sigma) in the plane whose minimum-norm hull point is a
    support point with margin, so a 0.01 grid pins the optimum down.

    One point sits at distance ~1 from the origin; every other point is
    pushed strictly outward along its covariance gradient.
    """
    sigma = random_conditioned_psd(rng, 2)
    v = rng.standard_normal(2)
    v *= rng.uniform(0.8, 1.5) / np.linalg.norm(v)
    k = int(rng.integers(1, 6))
    points = [v]
    grad = sigma @ v
    vnorm = float(v @ grad)
    while len(points) < k:
        q = rng.standard_normal(2)
        if q @ grad < 0:
            q = -q
        if q @ grad >= 0.3 * vnorm:
            points.append(v + q)
    return np.array(points), sigma


def zero_in_hull_support(rng: np.random.Generator):
    """(points, sigma) in the plane whose hull strictly surrounds zero,

    giving a cone-sharp optimum exactly at the origin."""
    sigma = random_conditioned_psd(rng, 2)
    k = int(rng.integers(4, 6))
    ang = 2.0 * np.pi * np.arange(k) / k
    ang = ang + rng.uniform(-0.15, 0.15, k) * 2.0 * np.pi / k
    rad = rng.uniform(0.8, 1.5, k)
    points = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    return points, sigma


def simplex_grid(G: int, step: float) -> np.ndarray:
    """All weight vectors on the simplex lattice with the given step."""
    m = int(round(1.0 / step))
    if G == 1:
        return np.ones((1, 1))
    if G == 2:
        t = np.arange(m + 1) / m
        return np.column_stack([t, 1.0 - t])
    if G == 3:
        i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
        keep = (i + j) <= m
        w1 = i[keep] / m
        w2 = j[keep] / m
        return np.column_stack([w1, w2, 1.0 - w1 - w2])
    raise ValueError("grid oracle only implemented for G <= 3")


def brute_force_simplex_qp(
    H: np.ndarray, linear: np.ndarray | None = None, step: float = 1e-3
) -> float:
    """Dense grid search for min w'Hw + 2 q'w over the simplex."""
    W = simplex_grid(H.shape[0], step)
    vals = np.einsum("ij,jk,ik->i", W, H, W)
    if linear is not None:
        vals = vals + 2.0 * (W @ linear)
    return float(vals.min())
