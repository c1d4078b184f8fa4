"""Finite-sum objectives with per-point product caching and cost accounting.

Every component ``f_j`` is assumed to need one expensive "scalar product"
per evaluation point (for logistic regression, ``a_j^T x``). Function and
gradient of the same component at the same point share that product, which
is what the SP / FE / GE_1 / GE_2 counters account for:

* ``sp``  -- scalar products actually computed
* ``fe``  -- component function evaluations
* ``ge1`` -- component gradients that needed a fresh scalar product
* ``ge2`` -- every component gradient evaluation

As long as each component value is evaluated at most once per cache,
``sp == fe + ge1`` holds exactly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset, Split


@dataclass
class CostCounters:
    N: int
    sp: int = 0
    fe: int = 0
    ge1: int = 0
    ge2: int = 0

    def snapshot(self) -> dict:
        return {"sp": self.sp, "fe": self.fe, "ge1": self.ge1, "ge2": self.ge2}

    def normalized(self) -> dict:
        return {key: value / self.N for key, value in self.snapshot().items()}

    def copy(self) -> "CostCounters":
        return CostCounters(**asdict(self))


class ExpCache:
    """Scalar products ``z_j`` computed at a single point, keyed by component.

    A cache belongs to one iterate (``tag``); callers create a new cache
    whenever the evaluation point changes.
    """

    def __init__(self, N: int, tag=None):
        self.tag = tag
        self.products = np.zeros(N)
        self.filled = np.zeros(N, dtype=bool)

    def __len__(self):
        return int(self.filled.sum())


class ComponentGradients:
    """Gradients of the components ``indices`` at one point.

    ``total(positions)`` sums the gradients at the given positions of
    ``indices`` (all of them by default), always in ascending index order, so
    that the same subset reduces to bitwise identical results.
    """

    def __init__(self, indices: np.ndarray, rows: np.ndarray):
        self.indices = indices
        self.rows = rows

    def __len__(self):
        return self.indices.size

    def _positions(self, positions):
        if positions is None or len(positions) == len(self):
            return None
        return np.asarray(positions)

    def total(self, positions=None) -> np.ndarray:
        positions = self._positions(positions)
        rows = self.rows if positions is None else self.rows[positions]
        return rows.sum(axis=0)

    def mean(self, positions=None) -> np.ndarray:
        count = len(self) if positions is None else len(positions)
        if count == 0:
            raise ValueError("mean over an empty set of components")
        return self.total(positions) / count

    def positions_of(self, subset: np.ndarray) -> np.ndarray:
        """Positions in ``indices`` of the (sorted) component indices ``subset``."""
        pos = np.searchsorted(self.indices, subset)
        if np.any(pos >= len(self)) or np.any(self.indices[np.minimum(pos, len(self) - 1)] != subset):
            raise KeyError("subset contains components not stored here")
        return pos


def _as_index_array(S) -> np.ndarray:
    idx = np.asarray(getattr(S, "indices", S), dtype=np.intp).ravel()
    if idx.size == 0:
        raise ValueError("empty sample")
    return idx


class FiniteSumObjective:
    """``f(x) = (1/N) sum_j f_j(x)``.

    Subclasses implement ``_products``, ``_values`` and ``_gradients``; the
    caching and counting rules live here.
    """

    N: int
    n: int

    def _products(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _values(self, idx: np.ndarray, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _gradients(self, idx: np.ndarray, x: np.ndarray, z: np.ndarray) -> ComponentGradients:
        raise NotImplementedError

    def _lookup(self, idx, x, cache, counters):
        """Products for ``idx`` at ``x``; returns ``(z, number_newly_computed)``."""
        if cache is None:
            z = self._products(idx, x)
            fresh = idx.size
        else:
            missing = idx[~cache.filled[idx]]
            if missing.size:
                cache.products[missing] = self._products(missing, x)
                cache.filled[missing] = True
            z = cache.products[idx]
            fresh = missing.size
        if counters is not None:
            counters.sp += fresh
        return z, fresh

    def sampled_value(self, S, x, cache: ExpCache | None = None, counters: CostCounters | None = None) -> float:
        idx = _as_index_array(S)
        z, _ = self._lookup(idx, x, cache, counters)
        if counters is not None:
            counters.fe += idx.size
        return float(np.sum(self._values(idx, x, z)) / idx.size)

    def component_gradients(self, S, x, cache=None, counters=None) -> ComponentGradients:
        idx = _as_index_array(S)
        z, fresh = self._lookup(idx, x, cache, counters)
        if counters is not None:
            counters.ge1 += fresh
            counters.ge2 += idx.size
        return self._gradients(idx, x, z)

    def sampled_gradient(self, S, x, cache=None, counters=None) -> np.ndarray:
        return self.component_gradients(S, x, cache, counters).mean()

    def component_value(self, j: int, x, cache=None, counters=None) -> float:
        return self.sampled_value([j], x, cache, counters)

    def component_gradient(self, j: int, x, cache=None, counters=None) -> np.ndarray:
        return self.sampled_gradient([j], x, cache, counters)

    @property
    def has_validation(self) -> bool:
        return False

    def full_indices(self) -> np.ndarray:
        return np.arange(self.N)

    def value(self, x) -> float:
        """Counter-exempt full-sum value."""
        return self.sampled_value(self.full_indices(), x)

    def gradient(self, x) -> np.ndarray:
        """Counter-exempt full-sum gradient."""
        return self.sampled_gradient(self.full_indices(), x)


class ComponentSum(FiniteSumObjective):
    """Finite sum of user-supplied callables, mostly for small test problems.

    Each component is charged one scalar product per point, like the
    logistic case.
    """

    def __init__(self, values, gradients, n: int):
        if len(values) != len(gradients) or not values:
            raise ValueError("need matching, non-empty value and gradient lists")
        self.fs = list(values)
        self.gs = list(gradients)
        self.N = len(self.fs)
        self.n = n

    def _products(self, idx, x):
        return np.zeros(idx.size)

    def _values(self, idx, x, z):
        return np.array([self.fs[j](x) for j in idx], dtype=float)

    def _gradients(self, idx, x, z):
        rows = np.array([np.asarray(self.gs[j](x), dtype=float).reshape(self.n) for j in idx])
        return ComponentGradients(idx, rows)


def _log1p_exp(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    big = z > 700.0
    out[~big] = np.log1p(np.exp(z[~big]))
    out[big] = z[big] + np.log1p(np.exp(-z[big]))
    return out


def _exp_ratio(z: np.ndarray) -> np.ndarray:
    """``exp(z) / (1 + exp(z))`` without overflow."""
    out = np.empty_like(z)
    big = z > 700.0
    e = np.exp(z[~big])
    out[~big] = e / (1.0 + e)
    out[big] = 1.0 / (1.0 + np.exp(-z[big]))
    return out


def _covers(idx: np.ndarray, N: int) -> bool:
    """True when ``idx`` is exactly ``0..N-1`` in order, so the whole matrix can be used."""
    return idx.size == N and bool(np.all(idx[1:] > idx[:-1]))


class LogisticGradients(ComponentGradients):
    """Component gradients ``w_j b_j a_j + 2 lam x`` stored as the scalars ``w_j b_j``."""

    def __init__(self, objective: "LogisticObjective", indices, coefficients, x):
        self.objective = objective
        self.indices = indices
        self.coefficients = coefficients
        self.x = x

    def total(self, positions=None):
        positions = self._positions(positions)
        obj = self.objective
        if positions is None:
            idx, coef = self.indices, self.coefficients
        else:
            idx, coef = self.indices[positions], self.coefficients[positions]
        rows = obj.A if _covers(idx, obj.N) else obj.A[idx]
        data = rows.T @ coef
        return np.asarray(data).ravel() + (2.0 * obj.lam * idx.size) * self.x

    @property
    def rows(self):
        A = self.objective.A[self.indices]
        A = A.toarray() if sp.issparse(A) else A
        return self.coefficients[:, None] * A + 2.0 * self.objective.lam * self.x


class LogisticObjective(FiniteSumObjective):
    """``f_j(x) = log(1 + exp(-b_j a_j^T x)) + lam ||x||^2`` over the training rows.

    The cached scalar product for component ``j`` is ``z_j = -b_j a_j^T x``.
    """

    def __init__(self, A, b, lam: float | None = None, A_val=None, b_val=None):
        self.A = A if sp.issparse(A) else np.ascontiguousarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.N, self.n = self.A.shape
        self.lam = 1.0 / self.N if lam is None else float(lam)
        self.A_val = A_val
        self.b_val = None if b_val is None else np.asarray(b_val, dtype=float)

    @classmethod
    def from_split(cls, ds: Dataset, split: Split, lam: float | None = None) -> "LogisticObjective":
        A = ds.features
        return cls(
            A[split.train_indices],
            ds.labels[split.train_indices],
            lam=lam,
            A_val=A[split.validation_indices] if split.validation_indices.size else None,
            b_val=ds.labels[split.validation_indices] if split.validation_indices.size else None,
        )

    def _products(self, idx, x):
        rows = self.A if _covers(idx, self.N) else self.A[idx]
        return -self.b[idx] * np.asarray(rows @ x).ravel()

    def _values(self, idx, x, z):
        return _log1p_exp(z) + self.lam * float(x @ x)

    def _gradients(self, idx, x, z):
        return LogisticGradients(self, idx, -_exp_ratio(z) * self.b[idx], x)

    @property
    def has_validation(self) -> bool:
        return self.A_val is not None and self.b_val.size > 0

    def validation_loss(self, x) -> float:
        """Mean component value over the validation rows; never counted."""
        if not self.has_validation:
            raise ValueError("no validation set")
        z = -self.b_val * np.asarray(self.A_val @ x).ravel()
        return float(np.sum(_log1p_exp(z) + self.lam * float(x @ x)) / self.b_val.size)

    def row_norms_sq(self) -> np.ndarray:
        if sp.issparse(self.A):
            return np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel()
        return np.einsum("ij,ij->i", self.A, self.A)

    def lipschitz_bound(self) -> float:
        """``max_j ||a_j||^2 / 4 + 2 lam`` bounds the Lipschitz constant of every gradient."""
        return float(self.row_norms_sq().max() / 4.0 + 2.0 * self.lam)

    def strong_convexity_bound(self) -> float:
        return 2.0 * self.lam
