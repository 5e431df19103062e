"""Random evaluation points spread through a (possibly mixture-constrained) factor space."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
import pandas as pd

from ._errors import InfeasibleBoundsError
from .factors import FactorSpec, validate_specs

log = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-4
WARN_ACCEPTANCE = 0.01
_PILOT = 20_000


def sample_simplex(rng, n, dim):
    """Uniform draws on the unit simplex via normalized exponential spacings."""
    e = rng.standard_exponential((n, dim))
    return e / e.sum(axis=1, keepdims=True)


def sample_mixture(specs: Sequence[FactorSpec], n, rng) -> np.ndarray:
    """Uniform draws on {x : sum x = 1, low <= x <= high}.

    Proposals are uniform on the simplex shifted by the lower bounds (an
    affine image of the unit simplex, so still uniform) and rejected when
    an upper bound is violated.
    """
    low = np.array([s.low for s in specs])
    high = np.array([s.high for s in specs])
    slack = 1.0 - low.sum()
    dim = len(specs)
    if slack <= 0:
        return np.tile(low, (n, 1))

    def propose(m):
        x = low + slack * sample_simplex(rng, m, dim)
        return x[(x <= high).all(axis=1)]

    pilot = propose(_PILOT)
    rate = len(pilot) / _PILOT
    if rate < MIN_ACCEPTANCE:
        raise InfeasibleBoundsError(
            f"mixture rejection acceptance {rate:.2e} below {MIN_ACCEPTANCE:g}; "
            "bounds are (nearly) infeasible")
    if rate < WARN_ACCEPTANCE:
        log.warning("mixture rejection acceptance is low (%.3g)", rate)

    accepted = [pilot[:n]]
    have = len(accepted[0])
    while have < n:
        batch = propose(int(1.2 * (n - have) / rate) + 16)
        accepted.append(batch[: n - have])
        have += len(accepted[-1])
    return np.vstack(accepted)


def _latin_hypercube(rng, n):
    return (rng.permutation(n) + rng.random(n)) / n


def sample_points(specs: Sequence[FactorSpec], n_point: int, seed: int,
                  latin_hypercube: bool = False) -> pd.DataFrame:
    """Draw ``n_point`` factor settings uniformly over the study region.

    Mixture factors are sampled jointly on their bound-constrained simplex,
    continuous factors uniformly on their range (or by Latin hypercube when
    ``latin_hypercube`` is set) and categorical factors uniformly over levels.
    Columns come back in spec order.
    """
    specs = validate_specs(specs)
    if not specs:
        raise ValueError("need at least one factor")
    if n_point < 1:
        raise ValueError("n_point must be >= 1")
    rng = np.random.default_rng(seed)

    cols = {}
    mix = [s for s in specs if s.role == "mixture"]
    if mix:
        block = sample_mixture(mix, n_point, rng)
        for j, s in enumerate(mix):
            cols[s.name] = block[:, j]
    for s in specs:
        if s.role == "continuous":
            u = _latin_hypercube(rng, n_point) if latin_hypercube else rng.random(n_point)
            cols[s.name] = s.low + (s.high - s.low) * u
        elif s.role == "categorical":
            idx = rng.integers(len(s.levels), size=n_point)
            cols[s.name] = np.asarray(s.levels, dtype=object)[idx]
    return pd.DataFrame({s.name: cols[s.name] for s in specs})
