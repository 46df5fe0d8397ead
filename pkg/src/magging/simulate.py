"""Synthetic data generators for the heterogeneous-regression experiments.

Mixture scenarios (standard-normal design, per-sample coefficient vectors):

* clusterwise: known groups, one coefficient vector per group;
* smooth-drift: coefficients follow a slow random walk over the sample
  index, grouped into consecutive blocks;
* outliers: one majority coefficient vector, a contaminated minority with
  a single large stray vector, and randomly subsampled (overlapping)
  groups.

The periodic scenario reproduces the recordings experiment: each group is
one recording on a shared sine/cosine dictionary, equal to a common signal
plus a few group-specific frequency components with random phase plus
noise.

All draws descend from child generators keyed on (seed, stream[, index]),
so outputs are bit-reproducible and per-group streams are independent of
each other and of the design/noise streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .groups import (
    Grouping,
    consecutive_blocks,
    known_groups,
    random_subsample,
    rng_from_path,
)
from .linalg import gram

SCENARIO_CLUSTERWISE = "clusterwise"
SCENARIO_SMOOTH_DRIFT = "smooth-drift"
SCENARIO_OUTLIERS = "outliers"
SCENARIO_PERIODIC = "periodic"
MIXTURE_SCENARIOS = (SCENARIO_CLUSTERWISE, SCENARIO_SMOOTH_DRIFT, SCENARIO_OUTLIERS)

# Contaminated samples get one stray coefficient vector of this many times
# the majority scale (times sqrt(p), matching the expected majority norm).
OUTLIER_COEF_MULTIPLIER = 10.0

# The contaminated fraction must stay a minority for "the majority
# coefficient" to be meaningful.
MAX_CONTAMINATION = 0.5

PER_SAMPLE = "sample"
PER_GROUP = "group"

# RNG stream ids (second entry of the seed path).
_STREAM_DESIGN = 0
_STREAM_COEFFS = 1
_STREAM_NOISE = 2
_STREAM_GROUP_COEFFS = 4
_STREAM_GROUP_NOISE = 5


@dataclass(frozen=True)
class MixtureSimConfig:
    n: int
    p: int
    G: int
    scenario: str = SCENARIO_CLUSTERWISE
    noise_sd: float = 1.0
    coefficient_scale: float = 1.0
    contamination_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in MIXTURE_SCENARIOS:
            raise ValueError(f"unknown mixture scenario {self.scenario!r}")
        if self.n < 1 or self.p < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if not (1 <= self.G <= self.n):
            raise ValueError("need 1 <= G <= n")
        if not (self.noise_sd >= 0):
            raise ValueError("noise_sd must be >= 0")
        if not (0.0 <= self.contamination_fraction < MAX_CONTAMINATION):
            raise ValueError(
                f"contamination_fraction must lie in [0, {MAX_CONTAMINATION}); "
                "the clean part must stay a majority"
            )
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class PeriodicSimConfig:
    n_per_group: int = 300
    G: int = 50
    dict_size: int = 100
    common_components: int = 2
    per_group_components: int = 7
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.G < 1 or self.dict_size < 1:
            raise ValueError("need G >= 1 and dict_size >= 1")
        if self.common_components < 0 or self.per_group_components < 0:
            raise ValueError("component counts must be >= 0")
        if self.common_components + self.per_group_components > self.dict_size:
            raise ValueError(
                "common_components + per_group_components must not exceed dict_size"
            )
        if self.n_per_group <= 2 * self.dict_size:
            raise ValueError(
                "n_per_group must exceed 2 * dict_size (distinct, estimable "
                "frequencies need recordings longer than the dictionary)"
            )
        if not (self.noise_sd >= 0):
            raise ValueError("noise_sd must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


@dataclass(eq=False)
class SimOutput:
    """A simulated dataset plus the ground truth that produced it."""

    X: np.ndarray
    Y: np.ndarray
    grouping: Grouping
    true_B: np.ndarray        # (n, p) per sample or (G, p) per group
    true_b_per: str           # PER_SAMPLE or PER_GROUP
    sigma_true: np.ndarray
    common_signal: np.ndarray | None
    config: dict              # scenario parameters, echoed into metadata

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def per_sample_coeffs(self) -> np.ndarray:
        """(n, p) coefficient matrix, expanding per-group truths as needed."""
        if self.true_b_per == PER_SAMPLE:
            return self.true_B
        B = np.empty((self.n, self.p))
        for g, idx in enumerate(self.grouping.groups):
            B[idx] = self.true_B[g]
        return B

    def group_truths(self) -> np.ndarray:
        """(G, p) per-group true coefficients.

        Exact generating vectors when coefficients are group-constant,
        within-group averages otherwise.
        """
        if self.true_b_per == PER_GROUP:
            return self.true_B
        return np.vstack(
            [self.true_B[idx].mean(axis=0) for idx in self.grouping.groups]
        )


def _block_labels(n: int, G: int) -> np.ndarray:
    blocks = consecutive_blocks(n, G)
    labels = np.empty(n, dtype=np.int64)
    for g, idx in enumerate(blocks.groups):
        labels[idx] = g
    return labels


def simulate_mixture(cfg: MixtureSimConfig) -> SimOutput:
    """Draw one dataset from the requested mixture scenario."""
    n, p, G = cfg.n, cfg.p, cfg.G
    scale = cfg.coefficient_scale
    X = rng_from_path(cfg.seed, _STREAM_DESIGN).standard_normal((n, p))
    rng_c = rng_from_path(cfg.seed, _STREAM_COEFFS)
    common_signal = None

    if cfg.scenario == SCENARIO_CLUSTERWISE:
        labels = _block_labels(n, G)
        grouping = known_groups(labels)
        b = scale * rng_c.standard_normal((G, p))
        B_sample = b[labels]
        true_B, per = b, PER_GROUP
    elif cfg.scenario == SCENARIO_SMOOTH_DRIFT:
        grouping = consecutive_blocks(n, G)
        start = scale * rng_c.standard_normal(p)
        increments = (scale / math.sqrt(n)) * rng_c.standard_normal((n - 1, p))
        B_sample = np.vstack([start, start + np.cumsum(increments, axis=0)])
        true_B, per = B_sample, PER_SAMPLE
    else:
        b_major = scale * rng_c.standard_normal(p)
        direction = rng_c.standard_normal(p)
        direction /= max(float(np.linalg.norm(direction)), 1e-300)
        b_stray = OUTLIER_COEF_MULTIPLIER * scale * math.sqrt(p) * direction
        n_out = int(round(cfg.contamination_fraction * n))
        stray_rows = rng_c.choice(n, size=n_out, replace=False)
        B_sample = np.tile(b_major, (n, 1))
        B_sample[stray_rows] = b_stray
        grouping = random_subsample(n, G, m=n // G, seed=cfg.seed)
        true_B, per = B_sample, PER_SAMPLE

    noise = cfg.noise_sd * rng_from_path(cfg.seed, _STREAM_NOISE).standard_normal(n)
    Y = np.einsum("ij,ij->i", X, B_sample) + noise
    return SimOutput(
        X=X, Y=Y, grouping=grouping, true_B=true_B, true_b_per=per,
        sigma_true=np.eye(p), common_signal=common_signal,
        config={
            "scenario": cfg.scenario, "n": n, "p": p, "G": G,
            "noise_sd": cfg.noise_sd, "coefficient_scale": scale,
            "contamination_fraction": cfg.contamination_fraction,
            "seed": cfg.seed,
        },
    )


def sine_cosine_dictionary(n_grid: int, dict_size: int) -> np.ndarray:
    """(n_grid, 2*dict_size) design: sin/cos pairs at frequencies j/n_grid,

    j = 1..dict_size, evaluated on the integer grid 0..n_grid-1.  Columns
    are pairwise orthogonal for dict_size < n_grid/2.
    """
    t = np.arange(n_grid)
    ang = 2.0 * np.pi * np.outer(t, np.arange(1, dict_size + 1)) / n_grid
    D = np.empty((n_grid, 2 * dict_size))
    D[:, 0::2] = np.sin(ang)
    D[:, 1::2] = np.cos(ang)
    return D


def _frequency_coeffs(freqs: np.ndarray, amplitudes: np.ndarray, p: int) -> np.ndarray:
    """Coefficient vector placing (sin, cos) amplitude pairs at `freqs`."""
    vec = np.zeros(p)
    vec[2 * freqs] = amplitudes[0::2]
    vec[2 * freqs + 1] = amplitudes[1::2]
    return vec


def simulate_periodic(cfg: PeriodicSimConfig) -> SimOutput:
    """Draw the recordings experiment: common signal + per-group disturbances.

    One fixed set of `per_group_components` frequencies (disjoint from the
    common ones) enters every recording, each time with a fresh random
    phase, so the disturbances are mean-zero over groups and live in a
    low-dimensional subspace whose hull closes around zero as G grows.
    Random phase comes from independent normal amplitudes on the sine and
    cosine column of each frequency, keeping the model linear in the
    dictionary.
    """
    P, J, G = cfg.n_per_group, cfg.dict_size, cfg.G
    p = 2 * J
    D = sine_cosine_dictionary(P, J)

    rng_c = rng_from_path(cfg.seed, _STREAM_COEFFS)
    common_freqs = np.sort(rng_c.choice(J, size=cfg.common_components, replace=False))
    common_vec = _frequency_coeffs(
        common_freqs, rng_c.standard_normal(2 * cfg.common_components), p
    )
    available = np.setdiff1d(np.arange(J), common_freqs)
    group_freqs = np.sort(
        rng_c.choice(available, size=cfg.per_group_components, replace=False)
    )

    true_B = np.empty((G, p))
    Y = np.empty(G * P)
    for g in range(G):
        rng_g = rng_from_path(cfg.seed, _STREAM_GROUP_COEFFS, g)
        own_vec = _frequency_coeffs(
            group_freqs, rng_g.standard_normal(2 * cfg.per_group_components), p
        )
        true_B[g] = common_vec + own_vec
        noise = cfg.noise_sd * rng_from_path(
            cfg.seed, _STREAM_GROUP_NOISE, g
        ).standard_normal(P)
        Y[g * P : (g + 1) * P] = D @ true_B[g] + noise

    X = np.tile(D, (G, 1))
    grouping = known_groups(np.repeat(np.arange(G), P))
    return SimOutput(
        X=X, Y=Y, grouping=grouping, true_B=true_B, true_b_per=PER_GROUP,
        sigma_true=gram(D, scale_by_n=True),
        common_signal=D @ common_vec,
        config={
            "scenario": SCENARIO_PERIODIC, "n": G * P, "p": p,
            "n_per_group": P, "G": G, "dict_size": J,
            "common_components": cfg.common_components,
            "per_group_components": cfg.per_group_components,
            "noise_sd": cfg.noise_sd, "seed": cfg.seed,
        },
    )
