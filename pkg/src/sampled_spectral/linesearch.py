"""Nonmonotone backtracking on the sampled objective.

A step ``alpha`` is accepted when

    f_S(x + alpha d) <= f_S(x) + c1 * alpha * g^T d + zeta_k

with a summable forcing sequence ``zeta_k = scale * k**(-exponent)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import ExpCache


@dataclass(frozen=True)
class LineSearchParams:
    c1: float = 1e-4
    c2: float = 0.9
    beta: float = 0.5
    max_backtracks: int = 15
    zeta_scale: float = 100.0
    zeta_exponent: float = 1.1

    def __post_init__(self):
        if not 0.0 < self.c1 <= self.c2 < 1.0:
            raise ValueError("need 0 < c1 <= c2 < 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("need 0 < beta < 1")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")
        if self.zeta_scale < 0.0 or self.zeta_exponent <= 1.0:
            raise ValueError("zeta must be non-negative and summable (exponent > 1)")


def zeta(k: int, params: LineSearchParams = LineSearchParams()) -> float:
    # the power law is undefined at k = 0; reuse the k = 1 value
    if k < 0:
        raise ValueError("k must be non-negative")
    return params.zeta_scale * max(k, 1) ** (-params.zeta_exponent)


def zeta_sum_bound(params: LineSearchParams = LineSearchParams()) -> float:
    """Upper bound on ``sum_{k>=1} zeta_k`` via the integral test."""
    p = params.zeta_exponent
    return params.zeta_scale * (1.0 + 1.0 / (p - 1.0))


@dataclass
class LineSearchResult:
    success: bool
    alpha: float
    trials: int
    f_new: float | None = None
    x_new: np.ndarray | None = None
    cache: ExpCache | None = None


def backtrack(S, x, d, g, f_x, zeta_k, params, objective, counters, tag=None) -> LineSearchResult:
    """Try ``alpha = beta**j`` for ``j = 0..max_backtracks``; first acceptable wins.

    Each trial costs one sampled function evaluation. On success the trial
    point's cache is returned with the result.
    """
    slope = float(g @ d)
    for j in range(params.max_backtracks + 1):
        alpha = params.beta**j
        x_new = x + alpha * d
        cache = ExpCache(objective.N, tag)
        f_new = objective.sampled_value(S, x_new, cache, counters)
        if f_new <= f_x + params.c1 * alpha * slope + zeta_k:
            return LineSearchResult(True, alpha, j + 1, f_new, x_new, cache)
    return LineSearchResult(False, 0.0, params.max_backtracks + 1)


def descent_holds(f_x, f_new, alpha, slope, zeta_k, c1) -> bool:
    """Replay of the acceptance test from recorded quantities."""
    return f_new <= f_x + c1 * alpha * slope + zeta_k


def wolfe_check(S, x, alpha, d, g, c2, objective) -> bool:
    """Curvature condition at the accepted step; diagnostic only, never counted."""
    g_new = objective.sampled_gradient(S, x + alpha * d)
    return float(g_new @ d) >= c2 * float(g @ d)
