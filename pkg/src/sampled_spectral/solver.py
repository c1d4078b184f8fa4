"""Variable-sample spectral gradient driver.

One iteration: pick the sample size and the subsample, evaluate the sampled
function and gradient at ``x_k`` (fresh products for the current sample),
form the spectral coefficient from the method's gradient displacement, then
backtrack along ``-g / sigma``. The full-sample method is the special case
where every sample is the whole training set.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import linesearch as ls_mod
from .linesearch import LineSearchParams, backtrack, wolfe_check, zeta
from .objective import CostCounters, ExpCache, FiniteSumObjective
from .sampling import SampleSchedule, SampleSet, first_sample, intersection, make_rng, next_nested, next_non_nested
from .spectral import (
    SIGMA_MAX,
    SIGMA_MIN,
    SpectralState,
    bb_coefficient,
    direction,
    displacement_y1,
    displacement_y2,
    displacement_y3,
)


class Method(str, enum.Enum):
    SG_N_1 = "SG_N_1"
    SG_N_2 = "SG_N_2"
    SG_I_1 = "SG_I_1"
    SG_I_3 = "SG_I_3"
    SGFull = "SGFull"

    @property
    def nested(self) -> bool:
        return self in (Method.SG_N_1, Method.SG_N_2, Method.SGFull)

    @property
    def displacement(self) -> int:
        return {"SG_N_1": 1, "SG_N_2": 2, "SG_I_1": 1, "SG_I_3": 3, "SGFull": 2}[self.value]

    @property
    def stores_components(self) -> bool:
        return not self.nested


SUBSAMPLED = (Method.SG_N_1, Method.SG_N_2, Method.SG_I_1, Method.SG_I_3)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    LINE_SEARCH_FAILURE = "LineSearchFailure"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class GradNorm:
    eps: float = 1e-4
    require_full: bool = True

    def satisfied(self, grad_norm, N_k, N, val=None, val_prev=None) -> bool:
        return grad_norm <= self.eps and (not self.require_full or N_k == N)


@dataclass(frozen=True)
class ValidationStall:
    """Stop on a relative rise (``growth``) or a stall (``rel_tol``) of the validation loss,
    once ``N_k >= p N``."""

    p: float
    growth: float = 1.1
    rel_tol: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")

    def satisfied(self, grad_norm, N_k, N, val=None, val_prev=None) -> bool:
        if val is None or val_prev is None:
            return False
        if N_k < self.p * N:
            return False
        return val > self.growth * val_prev or abs(val_prev - val) < self.rel_tol * abs(val)


@dataclass(frozen=True)
class MaxIter:
    limit: int

    def satisfied(self, *args, **kwargs) -> bool:
        return False


StopRule = GradNorm | ValidationStall | MaxIter


def evaluate_stop(stop, grad_norm: float, N_k: int, N: int, val=None, val_prev=None) -> bool:
    return stop.satisfied(grad_norm, N_k, N, val, val_prev)


@dataclass
class IterationRecord:
    k: int
    N_k: int
    sigma: float
    alpha: float
    trials: int
    grad_norm: float
    f_sampled: float
    zeta: float
    slope: float = math.nan
    f_next: float = math.nan
    sp: int = 0
    fe: int = 0
    ge1: int = 0
    ge2: int = 0
    f_full: float = math.nan
    grad_norm_full: float = math.nan
    nu: float = math.nan
    eta: float = math.nan
    val_loss: float = math.nan
    wolfe: bool | None = None

    def as_dict(self) -> dict:
        return asdict(self)


RECORD_FIELDS = [f.name for f in fields(IterationRecord)]


@dataclass
class RunResult:
    x: np.ndarray
    status: Status
    trace: list[IterationRecord]
    counters: CostCounters
    method: Method
    seed: int | None = None

    @property
    def iterations(self) -> int:
        """Iterations started, i.e. sampled gradients formed (terminal check included)."""
        return len(self.trace)

    @property
    def final_sample_size(self) -> int:
        return self.trace[-1].N_k


class SpectralSolver:
    """Runs one method on one objective; the attributes hold the live iteration state.

    ``k``, ``x``, ``state`` and ``sample`` may be overwritten between
    construction and :meth:`run` to start from an injected state.
    """

    def __init__(
        self,
        method,
        objective: FiniteSumObjective,
        schedule: SampleSchedule | None = None,
        ls: LineSearchParams = LineSearchParams(),
        stop=GradNorm(),
        seed: int | None = 0,
        max_iter: int = 10000,
        sigma_min: float = SIGMA_MIN,
        sigma_max: float = SIGMA_MAX,
        diagnostics: bool = False,
    ):
        self.method = Method(method)
        self.objective = objective
        N = objective.N
        if self.method is Method.SGFull or schedule is None:
            if self.method is not Method.SGFull:
                raise ValueError("subsampled methods need a sample schedule")
            schedule = SampleSchedule(N, 2.0, N)
        if schedule.N != N:
            raise ValueError(f"schedule is for N={schedule.N}, objective has N={N}")
        if not 0.0 < sigma_min < 1.0 < sigma_max:
            raise ValueError("need 0 < sigma_min < 1 < sigma_max")
        self.schedule = schedule
        self.ls = ls
        self.stop = stop
        self.seed = seed
        self.max_iter = stop.limit if isinstance(stop, MaxIter) else max_iter
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        self.diagnostics = diagnostics
        self.track_validation = isinstance(stop, ValidationStall) or (diagnostics and objective.has_validation)

        self.rng = None if self.method is Method.SGFull else make_rng(seed)
        self.counters = CostCounters(N)
        self.trace: list[IterationRecord] = []
        self.k = 0
        self.x: np.ndarray | None = None
        self.state: SpectralState | None = None
        self.sample: SampleSet | None = None
        self.val_prev: float | None = None

    def _next_sample(self, N_k: int) -> SampleSet:
        N = self.objective.N
        if self.method is Method.SGFull:
            return SampleSet(np.arange(N), self.k)
        if self.sample is None:
            return first_sample(N, N_k, self.rng, self.method.nested)
        if self.method.nested:
            return next_nested(self.sample, N_k, N, self.rng)
        return next_non_nested(self.sample, N_k, N, self.rng)

    def _sigma(self, S: np.ndarray, g, grads) -> float:
        state = self.state
        if state is None:
            return 1.0
        s = self.x - state.x_prev
        if not np.any(s):
            return 1.0
        variant = self.method.displacement
        if variant == 1:
            y = displacement_y1(S, g, state, self.objective, self.counters, self.method.nested)
        elif variant == 2:
            y = displacement_y2(g, state.g_prev)
        else:
            y = displacement_y3(np.intersect1d(S, state.sample_prev, assume_unique=True), grads, state)
        return bb_coefficient(s, y, self.sigma_min, self.sigma_max)

    def step(self) -> Status | None:
        """One iteration; returns a terminal status or ``None`` to continue."""
        obj = self.objective
        N = obj.N
        k = self.k
        N_k = self.schedule.size(k)
        sample = self._next_sample(N_k)
        S = sample.indices
        x = self.x

        cache = ExpCache(N, tag=k)
        f = obj.sampled_value(S, x, cache, self.counters)
        grads = obj.component_gradients(S, x, cache, self.counters)
        g = grads.mean()
        grad_norm = float(np.linalg.norm(g))
        rec = IterationRecord(k, N_k, math.nan, 0.0, 0, grad_norm, f, zeta(k, self.ls))

        val = obj.validation_loss(x) if self.track_validation else None
        if val is not None:
            rec.val_loss = val
        if self.diagnostics:
            rec.f_full = obj.value(x)
            rec.grad_norm_full = float(np.linalg.norm(obj.gradient(x)))

        if self.stop.satisfied(grad_norm, N_k, N, val, self.val_prev):
            rec.sp, rec.fe, rec.ge1, rec.ge2 = self.counters.snapshot().values()
            self.trace.append(rec)
            return Status.CONVERGED

        sigma = self._sigma(S, g, grads)
        d = direction(sigma, g)
        rec.sigma = sigma
        rec.slope = float(g @ d)
        result = backtrack(S, x, d, g, f, rec.zeta, self.ls, obj, self.counters, tag=k + 1)
        rec.trials = result.trials
        if result.success:
            rec.alpha = result.alpha
            rec.f_next = result.f_new
            x_new = result.x_new
        else:
            x_new = x
            rec.f_next = f

        if self.diagnostics:
            f_full_next = obj.value(x_new)
            rec.nu = max(abs(f - rec.f_full), abs(rec.f_next - f_full_next))
            g_S_next = obj.sampled_gradient(S, x_new)
            g_full_next = obj.gradient(x_new)
            rec.eta = max(
                abs(rec.grad_norm_full**2 - grad_norm**2),
                abs(float(g_full_next @ g_full_next) - float(g_S_next @ g_S_next)),
            )
            if result.success:
                rec.wolfe = wolfe_check(S, x, result.alpha, d, g, self.ls.c2, obj)

        rec.sp, rec.fe, rec.ge1, rec.ge2 = self.counters.snapshot().values()
        self.trace.append(rec)
        if not result.success and N_k == N:
            return Status.LINE_SEARCH_FAILURE

        self.state = SpectralState(
            x_prev=x,
            g_prev=g,
            sample_prev=S,
            cache_prev=cache,
            grads_prev=grads if self.method.stores_components else None,
        )
        self.sample = sample
        self.val_prev = val
        self.x = x_new
        self.k = k + 1
        return None

    def run(self, x0=None) -> RunResult:
        if self.x is None:
            x0 = np.zeros(self.objective.n) if x0 is None else np.array(x0, dtype=float)
            if x0.shape != (self.objective.n,):
                raise ValueError(f"x0 has shape {x0.shape}, expected ({self.objective.n},)")
            self.x = x0
        status = None
        while status is None:
            if self.k >= self.max_iter:
                status = Status.MAX_ITER
                break
            status = self.step()
        return RunResult(self.x, status, self.trace, self.counters, self.method, self.seed)


def run(method, objective, schedule=None, ls=LineSearchParams(), stop=GradNorm(), x0=None, seed=0, **kwargs) -> RunResult:
    return SpectralSolver(method, objective, schedule, ls, stop, seed, **kwargs).run(x0)


def run_full(objective, ls=LineSearchParams(), stop=GradNorm(), x0=None, **kwargs) -> RunResult:
    """Deterministic full-sample spectral gradient method."""
    return SpectralSolver(Method.SGFull, objective, None, ls, stop, None, **kwargs).run(x0)


def replay_descent(trace, c1: float) -> list[int]:
    """Iterations whose accepted step violates the nonmonotone acceptance test."""
    bad = []
    for rec in trace:
        if rec.alpha > 0.0 and not ls_mod.descent_holds(rec.f_sampled, rec.f_next, rec.alpha, rec.slope, rec.zeta, c1):
            bad.append(rec.k)
    return bad
