import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svemwmt._errors import InfeasibleBoundsError
from svemwmt.factors import FactorSpec
from svemwmt.points import sample_points
from svemwmt.simulation import lnp_config

MIX = ["PEG", "Helper", "Ionizable", "Cholesterol"]


def test_lnp_points_respect_bounds_and_closure():
    specs, _ = lnp_config()
    T = sample_points(specs, 2000, seed=1)
    assert len(T) == 2000
    assert T["PEG"].between(0.01, 0.05).all()
    for s in specs:
        if s.role != "categorical":
            assert T[s.name].between(s.low, s.high).all(), s.name
    np.testing.assert_allclose(T[MIX].sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert set(T["Ionizable Lipid Type"]) == {"H101", "H102", "H103"}


def test_single_point_in_range():
    T = sample_points([FactorSpec("x", "continuous", 0, 2)], 1, seed=9)
    assert T.shape == (1, 1) and 0 <= T["x"][0] <= 2


def test_uniform_simplex_mean_is_one_third():
    specs = [FactorSpec(n, "mixture", 0, 1) for n in "abc"]
    n = 60_000
    T = sample_points(specs, n, seed=5)
    # uniform on the 2-simplex: Dirichlet(1,1,1), mean 1/3, var 1/18
    se = np.sqrt(1 / 18 / n)
    for c in "abc":
        assert abs(T[c].mean() - 1 / 3) < 3 * se


def test_seed_determinism():
    specs, _ = lnp_config()
    a = sample_points(specs, 100, seed=42)
    b = sample_points(specs, 100, seed=42)
    assert a.equals(b)
    assert not a.equals(sample_points(specs, 100, seed=43))


def test_infeasible_bounds_error():
    # the feasible slice is a tiny corner: acceptance far below 1e-4
    specs = [FactorSpec("a", "mixture", 0.0, 1.0)] + [
        FactorSpec(f"m{i}", "mixture", 0.0, 0.001) for i in range(6)]
    with pytest.raises(InfeasibleBoundsError):
        sample_points(specs, 10, seed=0)


def test_latin_hypercube_stratifies():
    T = sample_points([FactorSpec("x", "continuous", 0, 1)], 50, seed=0, latin_hypercube=True)
    counts = np.histogram(T["x"], bins=50, range=(0, 1))[0]
    assert np.all(counts == 1)


@st.composite
def mixture_specs(draw):
    k = draw(st.integers(2, 5))
    lows = [draw(st.floats(0, 0.2)) for _ in range(k)]
    highs = [lo + draw(st.floats(0.3, 1.0)) for lo in lows]
    highs = [min(hi, 1.0) for hi in highs]
    if sum(lows) > 0.7 or sum(highs) < 1.3:
        # keep the slice comfortably non-degenerate
        lows, highs = [0.0] * k, [1.0] * k
    specs = [FactorSpec(f"m{i}", "mixture", lo, hi) for i, (lo, hi) in
             enumerate(zip(lows, highs))]
    specs.append(FactorSpec("x", "continuous", -3, draw(st.floats(-2.9, 10))))
    specs.append(FactorSpec("g", "categorical", levels=("u", "v")))
    return specs


@given(specs=mixture_specs(), seed=st.integers(0, 10**6))
def test_point_matrix_invariants(specs, seed):
    T = sample_points(specs, 64, seed)
    mix = [s for s in specs if s.role == "mixture"]
    np.testing.assert_allclose(T[[s.name for s in mix]].sum(axis=1), 1.0, atol=1e-12, rtol=0)
    for s in specs:
        if s.role == "categorical":
            assert set(T[s.name]) <= set(s.levels)
        else:
            assert T[s.name].between(s.low, s.high).all()
