"""Gradient displacements, the safeguarded Barzilai-Borwein coefficient and the step direction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import ComponentGradients, CostCounters, ExpCache, FiniteSumObjective

SIGMA_MIN = 1e-8
SIGMA_MAX = 1e8


class SpectralStateError(RuntimeError):
    pass


@dataclass
class SpectralState:
    """What the previous iteration leaves behind for the next displacement.

    Nested variants only need ``x_prev``, the averaged ``g_prev`` and the
    previous sample size; non-nested variants also keep every component
    gradient of the previous sample in ``grads_prev``.
    """

    x_prev: np.ndarray
    g_prev: np.ndarray
    sample_prev: np.ndarray
    cache_prev: ExpCache | None = None
    grads_prev: ComponentGradients | None = None

    @property
    def n_prev(self) -> int:
        return self.sample_prev.size


def displacement_y1(
    sample: np.ndarray,
    g: np.ndarray,
    state: SpectralState,
    objective: FiniteSumObjective,
    counters: CostCounters | None,
    nested: bool,
) -> np.ndarray:
    """``grad f_S(x_k) - grad f_S(x_{k-1})`` over the current sample ``S``.

    Only components of ``S`` not seen at ``x_{k-1}`` are evaluated there;
    these are charged as new gradients (SP, GE_1, GE_2).
    """
    if state is None:
        raise SpectralStateError("no previous iterate")
    if nested:
        new = np.setdiff1d(sample, state.sample_prev, assume_unique=True)
        if new.size == 0:
            return g - state.g_prev
        extra = objective.component_gradients(new, state.x_prev, state.cache_prev, counters).total()
        old_mean = (state.n_prev * state.g_prev + extra) / sample.size
        return g - old_mean

    if state.grads_prev is None:
        raise SpectralStateError("non-nested y1 needs stored component gradients")
    common = np.intersect1d(sample, state.sample_prev, assume_unique=True)
    new = np.setdiff1d(sample, common, assume_unique=True)
    old_total = state.grads_prev.total(state.grads_prev.positions_of(common))
    if new.size:
        old_total = old_total + objective.component_gradients(
            new, state.x_prev, state.cache_prev, counters
        ).total()
    return g - old_total / sample.size


def displacement_y2(g: np.ndarray, g_prev: np.ndarray) -> np.ndarray:
    return g - g_prev


def displacement_y3(common: np.ndarray, grads: ComponentGradients, state: SpectralState) -> np.ndarray:
    """Mean gradient difference over the intersection ``common`` of consecutive samples.

    Both sides come from component gradients already computed (current
    iteration and storage), so nothing is charged.
    """
    if common.size == 0:
        raise SpectralStateError("empty intersection")
    if state is None or state.grads_prev is None:
        raise SpectralStateError("y3 needs stored component gradients")
    now = grads.mean(grads.positions_of(common))
    before = state.grads_prev.mean(state.grads_prev.positions_of(common))
    return now - before


def bb_coefficient(s: np.ndarray, y: np.ndarray, sigma_min: float = SIGMA_MIN, sigma_max: float = SIGMA_MAX) -> float:
    """``s^T y / s^T s`` if inside ``[sigma_min, sigma_max]``, else 1."""
    ss = float(s @ s)
    if ss == 0.0:
        return 1.0
    ratio = float(s @ y) / ss
    if sigma_min <= ratio <= sigma_max:
        return ratio
    return 1.0


def direction(sigma: float, g: np.ndarray) -> np.ndarray:
    if not sigma > 0.0:
        raise ValueError(f"spectral coefficient must be positive, got {sigma}")
    return -g / sigma
