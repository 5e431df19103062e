import io
import json
import math

import numpy as np
import pandas as pd
import pytest

from svemwmt import ensemble
from svemwmt._errors import ConvergenceError, EvaluationError, FitError
from svemwmt.ensemble import summarize_predictions, svem_fit, svem_predict
from svemwmt.factors import FactorSpec, parse_terms
from svemwmt.points import sample_points
from svemwmt.weights import draw_weight_pair
from svemwmt.learners import forward_selection_fit

SPECS = [FactorSpec("a", "continuous", -1, 1), FactorSpec("b", "continuous", -1, 1),
         FactorSpec("c", "continuous", -1, 1)]
TERMS = parse_terms(["Intercept", "a", "b", "c", "a*b", "a*a"], SPECS)


def _data(seed=0, n=15):
    X = sample_points(SPECS, n, seed)
    rng = np.random.default_rng(seed + 1)
    y = 1 + 2 * X["a"] - X["b"] + 0.3 * rng.standard_normal(n)
    return X, y.to_numpy()


def test_single_member_has_zero_spread():
    X, y = _data()
    model = svem_fit(X, y, SPECS, TERMS, "fs", n_boot=1, seed=3)
    assert model.n_boot == 1
    np.testing.assert_array_equal(svem_predict(model, X).s_hat, 0.0)


@pytest.mark.parametrize("learner", ["fs", "lasso"])
def test_constant_response_intercept_only(learner):
    X, _ = _data()
    model = svem_fit(X, np.full(15, 2.5), SPECS, parse_terms(["Intercept"], SPECS),
                     learner, n_boot=10, seed=0)
    s = svem_predict(model, sample_points(SPECS, 20, 1))
    np.testing.assert_allclose(s.P, 2.5, atol=1e-12)
    np.testing.assert_allclose(s.s_hat, 0.0, atol=1e-12)


def test_noiseless_linear_interpolated_by_every_member():
    X, _ = _data()
    y = 0.5 + 1.5 * X["a"].to_numpy()
    model = svem_fit(X, y, SPECS, TERMS, "fs", n_boot=50, seed=4)
    s = svem_predict(model, X)
    for b in range(50):
        np.testing.assert_allclose(s.P[:, b], y, atol=1e-6)
    np.testing.assert_allclose(s.f_hat, y, atol=1e-6)


def test_member_b_uses_weight_iteration_b():
    from svemwmt.factors import expand_terms
    X, y = _data()
    model = svem_fit(X, y, SPECS, TERMS, "fs", n_boot=6, seed=21)
    Xm = expand_terms(SPECS, TERMS, X).values
    for b in (0, 5):
        fit = forward_selection_fit(Xm, y, draw_weight_pair(len(y), 21, b))
        np.testing.assert_allclose(model.members[b].coefficients, fit.coefficients, atol=1e-12)
        assert model.members[b].tuning_index == fit.tuning_index


def test_two_member_formula():
    P = np.array([[1.0, 4.0], [-2.0, 2.5]])
    s = summarize_predictions(P)
    for i, (a, b) in enumerate(P):
        assert s.f_hat[i] == (a + b) / 2
        assert s.s_hat[i] == pytest.approx(abs(a - b) / math.sqrt(2), rel=1e-15)


def test_repeated_row_gives_identical_predictions():
    X, y = _data()
    model = svem_fit(X, y, SPECS, TERMS, "lasso", n_boot=8, seed=0)
    T = pd.concat([X.iloc[[3]], X.iloc[[3]]], ignore_index=True)
    P = svem_predict(model, T).P
    np.testing.assert_array_equal(P[0], P[1])


@pytest.mark.parametrize("learner", ["fs", "lasso"])
def test_deterministic_and_shift_equivariant(learner):
    X, y = _data(2)
    T = sample_points(SPECS, 30, 9)
    a = svem_predict(svem_fit(X, y, SPECS, TERMS, learner, 20, seed=5), T)
    b = svem_predict(svem_fit(X, y, SPECS, TERMS, learner, 20, seed=5), T)
    np.testing.assert_array_equal(a.P, b.P)
    c = svem_predict(svem_fit(X, y + 7.25, SPECS, TERMS, learner, 20, seed=5), T)
    np.testing.assert_allclose(c.f_hat, a.f_hat + 7.25, atol=1e-8)
    np.testing.assert_allclose(a.f_hat, a.P.mean(axis=1), atol=1e-12)
    assert np.all(a.s_hat >= 0)


def test_out_of_range_prediction_names_row_and_factor():
    X, y = _data()
    model = svem_fit(X, y, SPECS, TERMS, "fs", 4, 0)
    T = pd.DataFrame({"a": [0.0, 0.1], "b": [0.0, 1.5], "c": [0.0, 0.0]})
    with pytest.raises(EvaluationError, match="row 1: factor 'b'"):
        svem_predict(model, T)


def test_missing_response_rejected():
    X, y = _data()
    y[2] = np.nan
    with pytest.raises(ValueError, match="missing"):
        svem_fit(X, y, SPECS, TERMS)


def test_learner_errors_tagged_with_member(monkeypatch):
    def fail(learner, X, Y, Wt, Wv):
        exc = ConvergenceError("no convergence", index=4)
        exc.problem = 7
        raise exc

    monkeypatch.setattr(ensemble, "fit_batch", fail)
    X, y = _data()
    with pytest.raises(FitError, match=r"index 7\)") as info:
        svem_fit(X, y, SPECS, TERMS, "lasso", n_boot=10)
    assert info.value.index == 7


def test_model_dump_roundtrip():
    X, y = _data()
    model = svem_fit(X, y, SPECS, TERMS, "fs", 3, 0)
    buf = io.StringIO()
    model.dump(buf)
    doc = json.loads(buf.getvalue())
    assert doc["columns"] == list(model.columns) and len(doc["members"]) == 3
    np.testing.assert_array_equal(np.array([m["coefficients"] for m in doc["members"]]),
                                  model.coefficients)
