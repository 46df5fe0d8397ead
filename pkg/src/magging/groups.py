"""Construction of sample groups for subsample-and-aggregate estimation.

Three strategies: groups given by known labels, non-overlapping consecutive
blocks, and random subsampling (without replacement within a group, with
replacement between groups, so groups may overlap).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

STRATEGY_KNOWN = "known"
STRATEGY_BLOCKS = "blocks"
STRATEGY_SUBSAMPLE = "subsample"
STRATEGIES = (STRATEGY_KNOWN, STRATEGY_BLOCKS, STRATEGY_SUBSAMPLE)

# Generator behind all seeded group draws; recorded in dataset metadata so a
# grouping can be reproduced across runs.
RNG_ALGORITHM = "numpy-pcg64"


def rng_from_path(seed: int, *path: int) -> np.random.Generator:
    """Deterministic child generator for (seed, stream, index, ...) paths."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


@dataclass(eq=False)
class Grouping:
    """G index sets over samples 0..n-1, with the strategy that built them."""

    groups: list[np.ndarray]
    strategy: str
    n: int
    seed: int | None = field(default=None)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len(self.groups) < 1:
            raise ValueError("need at least one group")
        self.groups = [np.asarray(g, dtype=np.int64).ravel() for g in self.groups]
        for k, g in enumerate(self.groups):
            if g.size == 0:
                raise ValueError(f"group {k} is empty")
            if g.min() < 0 or g.max() >= self.n:
                raise ValueError(f"group {k} has indices outside [0, {self.n})")
        if self.strategy == STRATEGY_BLOCKS:
            flat = np.concatenate(self.groups)
            if flat.size != self.n or not np.array_equal(flat, np.arange(self.n)):
                raise ValueError("block groups must partition 0..n-1 in order")
        elif self.strategy == STRATEGY_SUBSAMPLE:
            for k, g in enumerate(self.groups):
                if np.unique(g).size != g.size:
                    raise ValueError(f"group {k} has repeated indices")
        elif self.strategy == STRATEGY_KNOWN:
            flat = np.sort(np.concatenate(self.groups))
            if flat.size != self.n or not np.array_equal(flat, np.arange(self.n)):
                raise ValueError("known groups must partition 0..n-1")

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def sizes(self) -> list[int]:
        return [int(g.size) for g in self.groups]

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "n": int(self.n),
            "groups": [[int(i) for i in g] for g in self.groups],
            "seed": None if self.seed is None else int(self.seed),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> "Grouping":
        return cls(
            groups=[np.asarray(g, dtype=np.int64) for g in d["groups"]],
            strategy=d["strategy"],
            n=int(d["n"]),
            seed=None if d.get("seed") is None else int(d["seed"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Grouping":
        return cls.from_json_dict(json.loads(text))


def known_groups(labels: np.ndarray) -> Grouping:
    """One group per distinct label value, ordered by ascending label."""
    labels = np.asarray(labels).ravel()
    if labels.size == 0:
        raise ValueError("empty label vector")
    if not np.all(labels == labels.astype(np.int64)):
        raise ValueError("labels must be integers")
    labels = labels.astype(np.int64)
    groups = [np.flatnonzero(labels == lab) for lab in np.unique(labels)]
    return Grouping(groups=groups, strategy=STRATEGY_KNOWN, n=labels.size)


def consecutive_blocks(n: int, G: int) -> Grouping:
    """G contiguous blocks of size floor(n/G); the last absorbs the remainder."""
    n, G = int(n), int(G)
    if G < 1 or G > n:
        raise ValueError(f"need 1 <= G <= n, got G={G}, n={n}")
    m = n // G
    groups = [np.arange(k * m, (k + 1) * m) for k in range(G - 1)]
    groups.append(np.arange((G - 1) * m, n))
    return Grouping(groups=groups, strategy=STRATEGY_BLOCKS, n=n)


def random_subsample(n: int, G: int, m: int, seed: int) -> Grouping:
    """G independent uniform draws of m distinct sample indices each.

    Group g is drawn from a child generator keyed on (seed, g), so parallel
    and sequential construction agree.
    """
    n, G, m = int(n), int(G), int(m)
    if m < 1 or m > n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if G < 1:
        raise ValueError("need G >= 1")
    groups = []
    for g in range(G):
        rng = rng_from_path(seed, 3, g)
        groups.append(np.sort(rng.choice(n, size=m, replace=False)))
    return Grouping(groups=groups, strategy=STRATEGY_SUBSAMPLE, n=n, seed=int(seed))
