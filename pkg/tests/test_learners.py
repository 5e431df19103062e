import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from svemwmt._errors import ConvergenceError, SingularSystemError
from svemwmt.learners import (LAMBDA_RATIO, N_LAMBDA, canonical_learner, cd_sweep,
                              forward_selection_batch, forward_selection_fit,
                              forward_selection_path, lasso_batch, lasso_fit_at,
                              lasso_objective, lasso_path, lasso_path_fit, lasso_problem,
                              weighted_least_squares)
from svemwmt.weights import WeightPair, draw_weight_pair


def _design(rng, n, p):
    return np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])


# ---------------------------------------------------------------- WLS

def test_wls_two_point_interpolation():
    X = np.array([[1.0, 0.0], [1.0, 1.0]])
    b = weighted_least_squares(X, np.array([0.0, 1.0]), np.ones(2))
    np.testing.assert_allclose(b, [0.0, 1.0], atol=1e-14)


def test_wls_duplicate_row_equals_double_weight():
    rng = np.random.default_rng(0)
    X = _design(rng, 7, 3)
    y = rng.standard_normal(7)
    w = rng.uniform(0.5, 2, 7)
    w2 = w.copy()
    w2[2] *= 2
    Xd = np.vstack([X, X[2]])
    yd = np.append(y, y[2])
    wd = np.append(w, w[2])
    np.testing.assert_allclose(weighted_least_squares(X, y, w2),
                               weighted_least_squares(Xd, yd, wd), atol=1e-10)


def test_wls_matches_sqrt_weighted_lstsq():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 3))
    y = rng.standard_normal(6)
    w = rng.uniform(0.1, 3, 6)
    np.testing.assert_allclose(weighted_least_squares(X, y, w), oracles.wls(X, y, w),
                               atol=1e-8)


def test_wls_jitters_collinear_and_rejects_zero_matrix():
    X = np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]])
    b = weighted_least_squares(X, np.array([1.0, 1.0, 1.0]), np.ones(3))
    np.testing.assert_allclose(X @ b, 1.0, atol=1e-6)
    with pytest.raises(SingularSystemError):
        weighted_least_squares(np.zeros((3, 2)), np.ones(3), np.ones(3))


def test_canonical_learner():
    assert canonical_learner("fs") == "forward_selection"
    assert canonical_learner("LASSO") == "lasso"
    with pytest.raises(ValueError):
        canonical_learner("tree")


# ---------------------------------------------------------------- forward selection

def test_fs_picks_signal_column_first():
    rng = np.random.default_rng(2)
    n = 20
    x1, x2 = rng.standard_normal(n), rng.standard_normal(n)
    y = 3 * x1 + 0.01 * rng.standard_normal(n)
    X = np.column_stack([np.ones(n), x2, x1])
    wp = draw_weight_pair(n, 4, 0)
    path = forward_selection_path(X, y, wp)
    assert path["order"][1] == 2
    # the independent brute-force path agrees
    models, _, _ = oracles.forward_path(X, y, wp.train, wp.valid)
    assert models[1] == [0, 2]


def test_fs_tuning_index_two_matches_enumeration():
    rng = np.random.default_rng(3)
    n = 14
    Z = rng.standard_normal((n, 4))
    y = 2 * Z[:, 0] + 1.5 * Z[:, 1] + 0.3 * rng.standard_normal(n)
    X = np.column_stack([np.ones(n), Z])
    wp = draw_weight_pair(n, 0, 0)
    _, _, vsse = oracles.forward_path(X, y, wp.train, wp.valid)
    assert int(np.argmin(vsse)) == 2
    fit = forward_selection_fit(X, y, wp)
    assert fit.tuning_index == 2
    assert set(np.flatnonzero(fit.coefficients)) == {0, 1, 2}


def test_fs_cap_for_p_greater_than_n():
    rng = np.random.default_rng(4)
    n, p = 8, 15
    X = _design(rng, n, p)
    y = rng.standard_normal(n)
    path = forward_selection_path(X, y, draw_weight_pair(n, 0, 0))
    assert len(path["order"]) <= min(p - 1, n - 1) + 1
    for b in range(20):
        fit = forward_selection_fit(X, y, draw_weight_pair(n, 0, b))
        assert np.count_nonzero(fit.coefficients) - 1 <= min(p - 1, n - 1)


@given(seed=st.integers(0, 10**6), n=st.integers(6, 14), p=st.integers(2, 6))
def test_fs_batch_matches_bruteforce_path(seed, n, p):
    rng = np.random.default_rng(seed)
    X = _design(rng, n, p)
    y = rng.standard_normal(n) + X[:, 1]
    wp = draw_weight_pair(n, seed, 0)
    path = forward_selection_path(X, y, wp)
    models, tsse, vsse = oracles.forward_path(X, y, wp.train, wp.valid)
    for s, cols in enumerate(models):
        assert sorted(path["order"][: s + 1]) == sorted(cols)
    np.testing.assert_allclose(path["train_sse"], tsse, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(path["valid_sse"], vsse, rtol=1e-8, atol=1e-10)
    # each path model is the full WLS refit on its columns
    for s, cols in enumerate(models):
        ref = np.zeros(p)
        ref[cols] = oracles.wls(X[:, cols], y, wp.train)
        np.testing.assert_allclose(path["coefficients"][s], ref, atol=1e-8)
    assert np.all(np.diff(path["train_sse"]) <= 1e-10 * tsse[0])


def test_fs_full_path_matches_wls_oracle():
    rng = np.random.default_rng(5)
    X = _design(rng, 30, 5)
    y = X @ np.array([1.0, -2, 0.5, 3, 0.0]) + 0.3 * rng.standard_normal(30)
    wp = draw_weight_pair(30, 1, 0)
    path = forward_selection_path(X, y, wp)
    np.testing.assert_allclose(path["coefficients"][-1], oracles.wls(X, y, wp.train),
                               atol=1e-4)


def test_fs_noiseless_recovery_with_equal_weights():
    rng = np.random.default_rng(6)
    X = _design(rng, 12, 4)
    y = 1.0 + 2.5 * X[:, 2]
    w = draw_weight_pair(12, 3, 0).train
    fit = forward_selection_fit(X, y, WeightPair(w, w))
    assert fit.coefficients[2] == pytest.approx(2.5, abs=1e-6)


def test_fs_batch_rows_are_independent_problems():
    rng = np.random.default_rng(7)
    X = _design(rng, 10, 4)
    Y = rng.standard_normal((3, 10))
    Wt = rng.exponential(size=(3, 10))
    Wv = rng.exponential(size=(3, 10))
    coef, stop = forward_selection_batch(X, Y, Wt, Wv)
    for b in range(3):
        c1, s1 = forward_selection_batch(X, Y[b], Wt[b], Wv[b])
        np.testing.assert_allclose(coef[b], c1[0], atol=1e-12)
        assert stop[b] == s1[0]


# ---------------------------------------------------------------- lasso

def test_lambda_max_zeroes_slopes():
    rng = np.random.default_rng(8)
    X = _design(rng, 15, 4)
    y = rng.standard_normal(15) + X[:, 1]
    wp = draw_weight_pair(15, 2, 0)
    path = lasso_path(X, y, wp)
    first = path["coefficients"][0]
    np.testing.assert_array_equal(first[1:], 0.0)
    assert first[0] == pytest.approx(np.average(y, weights=wp.train), abs=1e-12)
    lam = path["lambdas"]
    assert len(lam) == N_LAMBDA
    assert lam[-1] / lam[0] == pytest.approx(LAMBDA_RATIO, rel=1e-12)


@pytest.mark.parametrize("lam", [0.0, 0.05, 0.3, 0.8, 2.0])
def test_single_predictor_soft_threshold(lam):
    rng = np.random.default_rng(9)
    x = rng.uniform(-2, 3, 25)
    y = 1 + 0.7 * x + rng.standard_normal(25)
    X = np.column_stack([np.ones(25), x])
    b = lasso_fit_at(X, y, np.ones(25), lam)
    b0, b1 = oracles.single_predictor_lasso(x, y, lam)
    assert b[1] == pytest.approx(b1, abs=1e-8)
    assert b[0] == pytest.approx(b0, abs=1e-8)


def test_lasso_small_lambda_matches_wls():
    rng = np.random.default_rng(10)
    X = _design(rng, 40, 5)
    y = X @ np.array([2.0, 1, -1, 0.5, 0.25]) + 0.5 * rng.standard_normal(40)
    w = rng.exponential(size=40)
    prob = lasso_problem(X, y, w)
    lam = 1e-9 * np.abs(prob["c"]).max()
    np.testing.assert_allclose(lasso_fit_at(X, y, w, lam), oracles.wls(X, y, w), atol=1e-4)


def test_lasso_path_end_is_exact_lasso_at_lambda_min():
    rng = np.random.default_rng(11)
    X = _design(rng, 30, 4)
    y = X @ np.array([0.0, 1, -1, 0.5]) + 0.3 * rng.standard_normal(30)
    wp = draw_weight_pair(30, 5, 0)
    path = lasso_path(X, y, wp)
    ref = lasso_fit_at(X, y, wp.train, path["lambdas"][-1])
    np.testing.assert_allclose(path["coefficients"][-1], ref, atol=1e-6)


def test_lasso_noiseless_recovery_is_shrunk_by_lambda_min():
    # equal weights pick the smallest penalty; the slope there is 2.5 * (1 - 1e-4)
    rng = np.random.default_rng(12)
    x = rng.standard_normal(12)
    X = np.column_stack([np.ones(12), x])
    y = 1.0 + 2.5 * x
    w = np.ones(12)
    fit = lasso_path_fit(X, y, WeightPair(w, w))
    assert fit.tuning_index == N_LAMBDA - 1
    assert fit.coefficients[1] == pytest.approx(2.5 * (1 - LAMBDA_RATIO), abs=1e-6)


@given(seed=st.integers(0, 10**6))
def test_lasso_objective_non_increasing_per_sweep(seed):
    rng = np.random.default_rng(seed)
    n, p = 12, 7
    X = _design(rng, n, p)
    X[:, 3] = X[:, 2] + 0.1 * rng.standard_normal(n)
    y = X[:, 2] - X[:, 4] + rng.standard_normal(n)
    w = rng.exponential(size=n) + 1e-3
    prob = lasso_problem(X, y, w)
    lam = 0.05 * np.abs(prob["c"]).max()
    beta = np.zeros(p)
    Gb = np.zeros(p)
    prev = lasso_objective(prob, beta, lam, y, w)
    for _ in range(50):
        cd_sweep(prob["G"], prob["c"], lam, beta, Gb, prob["usable"])
        cur = lasso_objective(prob, beta, lam, y, w)
        assert cur <= prev + 1e-12 * max(1.0, abs(prev))
        prev = cur


def test_lasso_convergence_error_carries_lambda_index():
    rng = np.random.default_rng(13)
    X = _design(rng, 10, 5)
    X[:, 2] = X[:, 1] + 1e-3 * rng.standard_normal(10)
    y = rng.standard_normal(10)
    with pytest.raises(ConvergenceError) as info:
        lasso_batch(X, np.vstack([y, y]), np.ones((2, 10)), np.ones((2, 10)), max_sweeps=1)
    assert info.value.index is not None and info.value.index >= 1
    assert info.value.problem == 0


def test_constant_response_gives_intercept_only():
    rng = np.random.default_rng(14)
    X = _design(rng, 9, 3)
    y = np.full(9, 4.2)
    wp = draw_weight_pair(9, 0, 0)
    for fit in (lasso_path_fit(X, y, wp), forward_selection_fit(X, y, wp)):
        np.testing.assert_allclose(X @ fit.coefficients, 4.2, atol=1e-10)
