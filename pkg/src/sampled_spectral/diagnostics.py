"""Run-time checks of the convergence theory and independent numerical oracles.

Nothing here touches :class:`CostCounters`; all evaluations are counter-exempt.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .linesearch import LineSearchParams, zeta_sum_bound


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class TheoryConstants:
    L: float
    c: float
    C: float
    zeta_bar: float
    nu_bar: float

    @classmethod
    def from_run(cls, objective, ls: LineSearchParams, trace=None, zeta_bar=None):
        """Constants from the analytic bounds plus sums measured on ``trace``."""
        L = objective.lipschitz_bound()
        nu_bar = 0.0
        if trace is not None:
            nu_bar = float(sum(r.nu for r in trace if not math.isnan(r.nu)))
            if zeta_bar is None:
                zeta_bar = float(sum(r.zeta for r in trace if r.trials > 0))
        if zeta_bar is None:
            zeta_bar = zeta_sum_bound(ls)
        return cls(L, objective.strong_convexity_bound(), descent_constant(ls.c1, ls.c2, L), zeta_bar, nu_bar)


def descent_constant(c1: float, c2: float, L: float) -> float:
    """``C = -c1 (c2 - 1) / L``."""
    return -c1 * (c2 - 1.0) / L


def nu_k(S, x_k, x_next, objective) -> float:
    """Largest sampled-vs-full function gap at ``x_k`` and ``x_{k+1}``."""
    return max(
        abs(objective.sampled_value(S, x_k) - objective.value(x_k)),
        abs(objective.sampled_value(S, x_next) - objective.value(x_next)),
    )


def eta_k(S, x_k, x_next, objective) -> float:
    """Largest gap between squared full and sampled gradient norms at both points."""
    gaps = []
    for x in (x_k, x_next):
        g_full = objective.gradient(x)
        g_S = objective.sampled_gradient(S, x)
        gaps.append(abs(float(g_full @ g_full) - float(g_S @ g_S)))
    return max(gaps)


def fd_gradient(objective, j: int, x, h: float | None = None) -> np.ndarray:
    """Central differences of ``f_j`` using values only."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
    if h == 0.0:
        raise ValueError("step must be non-zero")
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (objective.component_value(j, x + e) - objective.component_value(j, x - e)) / (2.0 * h)
    return out


def gradient_check(objective, pairs, h=None) -> float:
    """Worst relative error between analytic and finite-difference gradients over ``(j, x)`` pairs."""
    worst = 0.0
    for j, x in pairs:
        g = objective.component_gradient(j, x)
        fd = fd_gradient(objective, j, x, h)
        scale = max(float(np.linalg.norm(g)), float(np.linalg.norm(fd)), 1e-12)
        worst = max(worst, float(np.linalg.norm(g - fd)) / scale)
    return worst


def complexity_bound(eps, f0, fstar, zeta_bar, nu_bar, C) -> int:
    """Iterations after which some ``||grad f_{N_k}(x_k)|| <= eps`` is guaranteed."""
    if eps <= 0.0 or C <= 0.0:
        raise ValueError("need eps > 0 and C > 0")
    return math.ceil((f0 - fstar + zeta_bar + 2.0 * nu_bar) / (C * eps * eps))


def rlinear_fit(gaps, min_points: int = 10):
    """Fit ``gap_k ~ Q rho^k`` by least squares on ``log gap``.

    Non-positive gaps are dropped (their iteration index is kept for the
    survivors). Returns ``(rho, r_squared)``.
    """
    gaps = np.asarray(gaps, dtype=float)
    k = np.arange(gaps.size)
    keep = gaps > 0.0
    if keep.sum() < min_points:
        raise InsufficientData(f"{int(keep.sum())} positive gaps, need {min_points}")
    k, y = k[keep].astype(float), np.log(gaps[keep])
    slope, intercept = np.polyfit(k, y, 1)
    resid = y - (slope * k + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_res <= 1e-24 * max(ss_tot, 1.0):
        r2 = 1.0
    elif ss_tot > 0.0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 0.0
    return float(math.exp(slope)), float(r2)


def descent_chain_check(trace, C: float) -> dict:
    """Check ``f(x_{k+1}) <= f(x_k) - C ||g_k||^2 + zeta_k + 2 nu_k`` along a trace.

    Needs the full values and ``nu_k`` recorded in diagnostics mode. The
    inequality is derived under the curvature condition, which backtracking
    does not enforce, so violations are reported rather than raised.
    """
    steps = [r for r in trace if r.trials > 0]
    if not steps:
        raise InsufficientData("no steps in trace")
    by_k = {r.k: r for r in trace}
    margins = []
    violations = []
    for rec in steps:
        nxt = by_k.get(rec.k + 1)
        if nxt is None:
            continue
        if any(math.isnan(v) for v in (rec.f_full, rec.nu, nxt.f_full)):
            raise ValueError("trace lacks diagnostics (run with diagnostics=True)")
        rhs = rec.f_full - C * rec.grad_norm**2 + rec.zeta + 2.0 * rec.nu
        margin = rhs - nxt.f_full
        margins.append(margin)
        if margin < 0.0:
            violations.append(rec.k)
    return {
        "check": "descent_chain",
        "C": C,
        "checked": len(margins),
        "violations": violations,
        "worst_margin": min(margins) if margins else math.nan,
        "passed": not violations,
    }


def first_below(trace, eps: float, attr: str = "grad_norm") -> int | None:
    for rec in trace:
        if getattr(rec, attr) <= eps:
            return rec.k
    return None


def wolfe_rate(trace) -> float:
    flags = [r.wolfe for r in trace if r.wolfe is not None]
    return float(np.mean(flags)) if flags else math.nan


def report(objective, ls: LineSearchParams, trace, fstar: float | None = None, eps: float = 1e-4) -> dict:
    """All trace-level checks bundled for JSON output."""
    consts = TheoryConstants.from_run(objective, ls, trace)
    out = {"constants": asdict(consts), "wolfe_rate": wolfe_rate(trace)}
    out["descent_chain"] = descent_chain_check(trace, consts.C)
    if fstar is not None:
        f0 = trace[0].f_full
        k_eps = complexity_bound(eps, f0, fstar, consts.zeta_bar, consts.nu_bar, consts.C)
        first = first_below(trace, eps)
        out["complexity"] = {
            "eps": eps,
            "k_eps": k_eps,
            "first_k": first,
            "passed": first is None or first <= k_eps,
        }
    full_from = next((r.k for r in trace if r.N_k == objective.N), None)
    if full_from is not None:
        tail = [r.nu for r in trace if r.k >= full_from and not math.isnan(r.nu)]
        out["nu_tail_sum"] = float(sum(tail))
    return out


def dumps(report_dict) -> str:
    return json.dumps(report_dict, indent=2, default=float)
