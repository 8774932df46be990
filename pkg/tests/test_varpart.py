import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from trltsk.varpart import AntecedentParams, fit_antecedents, kernel_widths, scale_widths, var_part


def test_two_obvious_clusters():
    centers, assign = var_part(np.array([[0.0], [1.0], [9.0], [10.0]]), 2)
    assert np.array_equal(centers, [[0.5], [9.5]])
    assert list(assign) == [0, 0, 1, 1]


def test_single_rule_is_global_mean(rng):
    x = rng.normal(size=(30, 3))
    centers, assign = var_part(x, 1)
    assert np.array_equal(centers[0], x.mean(axis=0))
    assert np.all(assign == 0)


def test_deterministic(rng):
    x = rng.normal(size=(40, 3))
    a = var_part(x, 4)
    b = var_part(x.copy(), 4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_slot_order_and_split_rule():
    # the wide cluster {0,1,2,3} keeps slot 0 after the first split; its
    # children are {0,1}, {2,3} and the untouched {100} stays last
    x = np.array([[0.0], [1.0], [3.0], [4.0], [100.0]])
    centers, _ = var_part(x, 2)
    assert np.allclose(centers[:, 0], [2.0, 100.0])
    centers, _ = var_part(x, 3)
    assert np.allclose(centers[:, 0], [0.5, 3.5, 100.0])


def test_near_tied_variances_pick_first_dimension():
    x = np.array([[-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0], [1.0, 1.0]])
    x[:, 1] *= 1 + 1e-14
    _, assign = var_part(x, 2)
    assert list(assign) == [0, 1, 0, 1]


def test_duplicate_points_are_halved():
    centers, assign = var_part(np.ones((4, 2)), 2)
    assert sorted(np.bincount(assign)) == [2, 2]
    assert np.array_equal(centers, np.ones((2, 2)))


def test_invalid_k(rng):
    with pytest.raises(ValueError):
        var_part(rng.normal(size=(3, 2)), 4)
    with pytest.raises(ValueError):
        var_part(rng.normal(size=(3, 2)), 0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(5, 30), st.integers(1, 4)),
              elements=st.floats(-100, 100)), st.integers(1, 5))
def test_partition_properties(x, K):
    centers, assign = var_part(x, K)
    assert centers.shape == (K, x.shape[1])
    assert set(np.unique(assign)) <= set(range(K))
    assert len(assign) == x.shape[0]
    w = kernel_widths(x, centers)
    assert np.all((w >= 1.0) & (w <= 10.0))


def test_widths_single_rule_midpoint():
    w = kernel_widths(np.array([[0.0], [2.0]]), np.array([[1.0]]))
    assert np.array_equal(w, [[5.5]])


def test_widths_min_max_scaling():
    assert np.array_equal(scale_widths(np.array([[2.0], [8.0]])), [[1.0], [10.0]])
    assert np.allclose(scale_widths(np.array([[2.0], [5.0], [8.0]]))[:, 0], [1.0, 5.5, 10.0])


def test_widths_sum_over_all_examples():
    x = np.array([[0.0], [1.0], [9.0], [10.0]])
    c = np.array([[0.5], [9.5], [5.0]])
    raw = [sum((xi - ck) ** 2 for xi in x[:, 0]) for ck in c[:, 0]]
    expected = 1 + 9 * (np.array(raw) - min(raw)) / (max(raw) - min(raw))
    assert np.allclose(kernel_widths(x, c)[:, 0], expected)


def test_antecedent_validation():
    with pytest.raises(ValueError):
        AntecedentParams(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        AntecedentParams(np.zeros((2, 2)), np.ones((2, 3)))
    p = fit_antecedents(np.arange(10.0).reshape(5, 2), 2)
    assert (p.K, p.d) == (2, 2)


def test_sse_non_increasing_with_splits(rng):
    x = rng.normal(size=(50, 3))
    totals = []
    for K in range(1, 9):
        _, assign = var_part(x, K)
        totals.append(sum(((x[assign == k] - x[assign == k].mean(axis=0)) ** 2).sum()
                          for k in range(K) if (assign == k).any()))
    assert all(b <= a + 1e-12 for a, b in zip(totals, totals[1:]))
