import math

import mpmath
import numpy as np
import pytest
import scipy.sparse as sp

from sampled_spectral import ComponentSum, CostCounters, ExpCache, LogisticObjective
from sampled_spectral.diagnostics import fd_gradient
from sampled_spectral.objective import ComponentGradients

LOG2 = math.log(2.0)


def one_point(a, b, lam):
    return LogisticObjective(np.array([a], dtype=float), np.array([b], dtype=float), lam=lam)


def test_value_at_origin_is_log2(problem):
    x = np.zeros(problem.n)
    for j in (0, 7, 1999):
        assert problem.component_value(j, x) == pytest.approx(LOG2, abs=1e-15)
    assert problem.sampled_value([3, 9, 11], x) == pytest.approx(LOG2, abs=1e-15)
    assert problem.value(x) == pytest.approx(LOG2, abs=1e-15)


def test_value_against_high_precision():
    mpmath.mp.dps = 40
    expected = float(mpmath.log(1 + mpmath.e) + mpmath.mpf("0.5"))
    assert expected == pytest.approx(1.813261687518223, abs=1e-15)
    obj = one_point([1.0, 0.0], -1.0, 0.5)
    assert obj.component_value(0, np.array([1.0, 0.0])) == pytest.approx(expected, rel=1e-15)


def test_value_vanishes_when_perfectly_classified():
    obj = one_point([1.0, 0.0], 1.0, 0.0)
    assert obj.component_value(0, np.array([50.0, 0.0])) < 1e-21
    # no overflow far on the wrong side either
    assert obj.component_value(0, np.array([-1e4, 0.0])) == pytest.approx(1e4)
    np.testing.assert_allclose(obj.component_gradient(0, np.array([-1e4, 0.0])), [-1.0, 0.0])


def test_gradient_at_origin(problem):
    x = np.zeros(problem.n)
    for j in (0, 5, 1234):
        np.testing.assert_allclose(problem.component_gradient(j, x), -0.5 * problem.b[j] * problem.A[j], atol=1e-15)
    S = np.array([1, 4, 9, 16])
    expected = (-0.5 * problem.b[S, None] * problem.A[S]).mean(axis=0)
    np.testing.assert_allclose(problem.sampled_gradient(S, x), expected, atol=1e-15)


def test_gradient_matches_finite_differences(problem, rng):
    for _ in range(20):
        j = int(rng.integers(problem.N))
        x = rng.standard_normal(problem.n)
        g = problem.component_gradient(j, x)
        np.testing.assert_allclose(g, fd_gradient(problem, j, x), rtol=1e-6, atol=1e-8)


def test_sampled_vs_full(problem, rng):
    x = rng.standard_normal(problem.n) * 0.3
    full = problem.full_indices()
    assert problem.sampled_value(full, x) == problem.value(x)
    np.testing.assert_array_equal(problem.sampled_gradient(full, x), problem.gradient(x))
    assert problem.sampled_value([17], x) == problem.component_value(17, x)
    # a permuted full set is not mistaken for the ordered one
    perm = rng.permutation(problem.N)
    assert problem.sampled_value(perm, x) == pytest.approx(problem.value(x), rel=1e-12)
    np.testing.assert_allclose(problem.sampled_gradient(perm, x), problem.gradient(x), rtol=1e-10, atol=1e-14)


def test_gradient_reuses_value_products(small_problem):
    x = np.full(small_problem.n, 0.1)
    cache, c = ExpCache(small_problem.N), CostCounters(small_problem.N)
    small_problem.component_value(4, x, cache, c)
    assert c.snapshot() == {"sp": 1, "fe": 1, "ge1": 0, "ge2": 0}
    small_problem.component_gradient(4, x, cache, c)
    assert c.snapshot() == {"sp": 1, "fe": 1, "ge1": 0, "ge2": 1}
    small_problem.component_gradient(5, x, cache, c)
    assert c.snapshot() == {"sp": 2, "fe": 1, "ge1": 1, "ge2": 2}
    assert c.sp == c.fe + c.ge1


def test_counting_rules_partial_overlap(small_problem):
    x = np.full(small_problem.n, -0.2)
    cache, c = ExpCache(small_problem.N), CostCounters(small_problem.N)
    small_problem.sampled_value([0, 1, 2], x, cache, c)
    small_problem.sampled_value([1, 2, 3, 4], x, cache, c)
    assert (c.sp, c.fe) == (5, 7)
    small_problem.component_gradients([3, 4, 5, 6], x, cache, c)
    assert (c.sp, c.ge1, c.ge2) == (7, 2, 4)
    assert c.normalized()["sp"] == pytest.approx(7 / small_problem.N)


def test_cache_does_not_change_results(problem, rng):
    x = rng.standard_normal(problem.n)
    S = np.sort(rng.choice(problem.N, 300, replace=False))
    cache = ExpCache(problem.N)
    problem.sampled_value(S[:100], x, cache)
    assert problem.sampled_value(S, x, cache) == problem.sampled_value(S, x)
    np.testing.assert_array_equal(problem.sampled_gradient(S, x, cache), problem.sampled_gradient(S, x))


def test_uncounted_calls_leave_counters(problem):
    c = CostCounters(problem.N)
    problem.value(np.ones(problem.n))
    problem.gradient(np.ones(problem.n))
    assert c.snapshot() == {"sp": 0, "fe": 0, "ge1": 0, "ge2": 0}


def test_empty_sample_rejected(problem):
    with pytest.raises(ValueError):
        problem.sampled_value([], np.zeros(problem.n))
    with pytest.raises(ValueError):
        problem.sampled_gradient(np.array([], dtype=int), np.zeros(problem.n))


def test_validation_loss():
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    obj = LogisticObjective(A, [1.0, -1.0], A_val=np.array([[2.0, 1.0]]), b_val=np.array([1.0]))
    assert obj.validation_loss(np.zeros(2)) == pytest.approx(LOG2)
    x = np.array([0.3, -0.1])
    single = LogisticObjective(np.array([[2.0, 1.0]]), [1.0], lam=obj.lam)
    assert obj.validation_loss(x) == pytest.approx(single.component_value(0, x), rel=1e-15)
    with pytest.raises(ValueError):
        LogisticObjective(A, [1.0, -1.0]).validation_loss(x)


def test_lipschitz_and_convexity_bounds():
    assert LogisticObjective(np.zeros((3, 2)), [1, -1, 1], lam=0.5).lipschitz_bound() == 1.0
    assert one_point([2.0, 0.0], 1.0, 0.0).lipschitz_bound() == 1.0
    assert LogisticObjective(np.zeros((100, 1)), np.ones(100)).strong_convexity_bound() == pytest.approx(0.02)
    assert one_point([1.0], 1.0, 0.0).strong_convexity_bound() == 0.0


def test_bounds_hold_on_random_pairs(problem, rng):
    L, c = problem.lipschitz_bound(), problem.strong_convexity_bound()
    for _ in range(50):
        j = int(rng.integers(problem.N))
        x, y = rng.standard_normal(problem.n) * 2, rng.standard_normal(problem.n) * 2
        dg = problem.component_gradient(j, x) - problem.component_gradient(j, y)
        dx = x - y
        assert np.linalg.norm(dg) <= L * np.linalg.norm(dx) * (1 + 1e-12)
        assert dg @ dx >= c * (dx @ dx) * (1 - 1e-9)


def test_sparse_matches_dense(problem, rng):
    sparse = LogisticObjective(sp.csr_matrix(problem.A), problem.b)
    x = rng.standard_normal(problem.n)
    S = np.array([2, 30, 400])
    assert sparse.sampled_value(S, x) == pytest.approx(problem.sampled_value(S, x), rel=1e-14)
    np.testing.assert_allclose(sparse.gradient(x), problem.gradient(x), rtol=1e-12)
    assert sparse.lipschitz_bound() == pytest.approx(problem.lipschitz_bound())
    np.testing.assert_allclose(sparse.component_gradients(S, x).rows, problem.component_gradients(S, x).rows)


def test_component_gradient_rows_match_total(problem, rng):
    x = rng.standard_normal(problem.n)
    grads = problem.component_gradients([5, 6, 70, 800], x)
    np.testing.assert_allclose(grads.rows.sum(axis=0), grads.total(), rtol=1e-12)
    pos = grads.positions_of(np.array([6, 800]))
    np.testing.assert_allclose(grads.mean(pos), grads.rows[[1, 3]].mean(axis=0), rtol=1e-12)
    with pytest.raises(KeyError):
        grads.positions_of(np.array([7]))


def test_component_sum_toy():
    obj = ComponentSum([lambda x: x[0] ** 2, lambda x: 3 * x[0]], [lambda x: [2 * x[0]], lambda x: [3.0]], n=1)
    x = np.array([2.0])
    assert obj.value(x) == pytest.approx((4 + 6) / 2)
    np.testing.assert_allclose(obj.gradient(x), [(4 + 3) / 2])
    c = CostCounters(2)
    obj.sampled_value([0, 1], x, ExpCache(2), c)
    assert c.sp == 2 and c.fe == 2
    assert isinstance(obj.component_gradients([0], x), ComponentGradients)
