"""Sample-size schedules and nested / non-nested subsample generators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; the same seed always replays the same stream."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


@dataclass(frozen=True)
class SampleSchedule:
    """``N_k = min(ceil(tau**k * N0), N)``."""

    N0: int
    tau: float
    N: int

    def __post_init__(self):
        if not 1 <= self.N0 <= self.N:
            raise ValueError(f"need 1 <= N0 <= N, got N0={self.N0}, N={self.N}")
        if not self.tau > 1.0:
            raise ValueError("growth factor tau must exceed 1")

    def size(self, k: int) -> int:
        if k < 0:
            raise ValueError("k must be non-negative")
        # float screen first; exact rational arithmetic only near or below the cap
        if k * math.log(self.tau) + math.log(self.N0) > math.log(self.N) + 1e-9:
            return self.N
        exact = Fraction(repr(self.tau)) ** k * self.N0
        return min(math.ceil(exact), self.N)

    __call__ = size

    def full_from(self) -> int:
        """First ``k`` with ``N_k == N``."""
        k = 0
        while self.size(k) < self.N:
            k += 1
        return k


@dataclass(frozen=True)
class SampleSet:
    indices: np.ndarray
    k: int = 0
    nested: bool = True

    def __len__(self):
        return self.indices.size


def _draw(pool: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    if m == 0:
        return pool[:0]
    return rng.choice(pool, size=m, replace=False, shuffle=False)


def first_sample(N: int, N0: int, rng, nested: bool = True) -> SampleSet:
    if not 1 <= N0 <= N:
        raise ValueError("need 1 <= N0 <= N")
    return SampleSet(np.sort(_draw(np.arange(N), N0, rng)), 0, nested)


def next_nested(prev: SampleSet, N_k: int, N: int, rng) -> SampleSet:
    """Add ``N_k - |prev|`` fresh uniform indices from outside ``prev``."""
    if N_k > N:
        raise ValueError(f"sample size {N_k} exceeds N={N}")
    if N_k < len(prev):
        raise ValueError("nested samples cannot shrink")
    if N_k == len(prev):
        return SampleSet(prev.indices, prev.k + 1, True)
    complement = np.setdiff1d(np.arange(N), prev.indices, assume_unique=True)
    added = _draw(complement, N_k - len(prev), rng)
    return SampleSet(np.sort(np.concatenate([prev.indices, added])), prev.k + 1, True)


def next_non_nested(prev: SampleSet, N_k: int, N: int, rng) -> SampleSet:
    """Keep one random index of ``prev``, draw the remaining ``N_k - 1`` afresh."""
    if N_k > N:
        raise ValueError(f"sample size {N_k} exceeds N={N}")
    if len(prev) == 0 or N_k < 1:
        raise ValueError("non-nested sampling needs a non-empty previous sample")
    keep = prev.indices[rng.integers(len(prev))]
    others = np.delete(np.arange(N), keep)
    drawn = _draw(others, N_k - 1, rng)
    return SampleSet(np.sort(np.append(drawn, keep)), prev.k + 1, False)


def intersection(prev: SampleSet, cur: SampleSet) -> np.ndarray:
    return np.intersect1d(prev.indices, cur.indices, assume_unique=True)
