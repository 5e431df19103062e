"""
Permutation whole-model test for self-validated ensembles.

For one response the test

1. samples ``n_point`` evaluation points ``T`` once;
2. refits the ensemble ``n_svem`` times to the observed response and records
   the standardized predictions ``(f_hat - y_bar) / s_hat`` at ``T``;
3. refits to ``n_perm`` random permutations of the response to build a
   reference matrix of the same quantities;
4. computes reduced-rank Mahalanobis distances of both sets of rows with
   respect to the column-standardized reference matrix;
5. fits a parametric distribution (SHASH by default) to the reference
   distances and reports ``1 - median(CDF(observed distances))``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from ._errors import DegenerateReferenceError, FitError
from ._seeding import derive_seed
from .distributions import FAMILIES, ReferenceFit, p_value_from_distances
from .ensemble import PredictionSummary, ensemble_coefficients, summarize_predictions
from .factors import FactorSpec, Term, expand_terms
from .learners import canonical_learner
from .points import sample_points

S_HAT_FLOOR = 1e-12
ZERO_NUMERATOR = 1e-10
GUARD_VALUE = 1e6

# seed stream tags
_T_STREAM, _OBS_STREAM, _PERM_STREAM, _REF_STREAM = 0, 1, 2, 3


@dataclass(frozen=True)
class TestSettings:
    n_perm: int = 125
    n_point: int = 2000
    n_boot: int = 200
    percent: float = 85.0
    n_svem: int = 5
    reference_family: str = "shash"
    seed: int = 0
    latin_hypercube: bool = False

    # keep pytest from collecting this class
    __test__ = False

    def __post_init__(self):
        for name in ("n_perm", "n_point", "n_boot", "n_svem"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0 < self.percent <= 100:
            raise ValueError("percent must lie in (0, 100]")
        if self.reference_family not in FAMILIES:
            raise ValueError(f"reference_family must be one of {FAMILIES}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self):
        return asdict(self)


class MahalanobisResult(NamedTuple):
    d_ref: np.ndarray
    d_obs: np.ndarray
    k: int
    eigenvalues: np.ndarray


@dataclass
class TestResult:
    d_ref: np.ndarray
    d_obs: np.ndarray
    k: int
    eigenvalues: np.ndarray
    reference: ReferenceFit
    p_value: float
    settings: TestSettings
    learner: str
    M_obs: np.ndarray = field(repr=False, default=None)
    M_ref: np.ndarray = field(repr=False, default=None)

    __test__ = False

    @property
    def family(self):
        return self.reference.family

    @property
    def params(self):
        return asdict(self.reference.params)

    def plot_data(self) -> pd.DataFrame:
        """Long table of distances: ``group`` in {reference, observed}, ``distance``."""
        return pd.DataFrame({
            "group": ["reference"] * len(self.d_ref) + ["observed"] * len(self.d_obs),
            "distance": np.concatenate([self.d_ref, self.d_obs]),
        })


def standardized_prediction_row(summary: PredictionSummary, y_bar: float) -> np.ndarray:
    """``(f_hat - y_bar) / s_hat`` with a guard for zero ensemble spread.

    Where ``s_hat`` vanishes the entry is 0 if ``f_hat`` equals ``y_bar``
    and ``sign(f_hat - y_bar) * 1e6`` otherwise.
    """
    diff = np.asarray(summary.f_hat, dtype=float) - y_bar
    s = np.asarray(summary.s_hat, dtype=float)
    flat = s < S_HAT_FLOOR
    out = np.empty_like(diff)
    out[~flat] = diff[~flat] / s[~flat]
    d = diff[flat]
    out[flat] = np.where(np.abs(d) < ZERO_NUMERATOR, 0.0, np.sign(d) * GUARD_VALUE)
    return out


def _standardized_rows(Xmat, Tmat, Y, seeds, learner, n_boot, y_bar):
    coef, _ = ensemble_coefficients(Xmat, Y, seeds, learner, n_boot)
    rows = np.empty((len(seeds), Tmat.shape[0]))
    for j in range(len(seeds)):
        summary = summarize_predictions(Tmat @ coef[j].T)
        rows[j] = standardized_prediction_row(summary, y_bar)
    return rows


def observed_matrix(Xmat, Tmat, y, learner, settings: TestSettings):
    """Matrix form of :func:`build_observed_matrix` on expanded model matrices."""
    y = np.asarray(y, dtype=float)
    seeds = [derive_seed(settings.seed, _OBS_STREAM, i) for i in range(settings.n_svem)]
    Y = np.tile(y, (settings.n_svem, 1))
    return _standardized_rows(Xmat, Tmat, Y, seeds, learner, settings.n_boot, y.mean())


def permutations(n, settings: TestSettings):
    """The ``n_perm`` index permutations used by the reference fits."""
    return np.array([
        np.random.default_rng(derive_seed(settings.seed, _PERM_STREAM, j)).permutation(n)
        for j in range(settings.n_perm)
    ]).reshape(settings.n_perm, n)


def reference_matrix(Xmat, Tmat, y, learner, settings: TestSettings):
    """Matrix form of :func:`build_reference_matrix` on expanded model matrices."""
    y = np.asarray(y, dtype=float)
    Y = y[permutations(y.size, settings)]
    seeds = [derive_seed(settings.seed, _REF_STREAM, j) for j in range(settings.n_perm)]
    return _standardized_rows(Xmat, Tmat, Y, seeds, learner, settings.n_boot, y.mean())


def evaluation_points(specs, settings: TestSettings):
    return sample_points(specs, settings.n_point, derive_seed(settings.seed, _T_STREAM),
                         latin_hypercube=settings.latin_hypercube)


def build_observed_matrix(X_rows, y, specs: Sequence[FactorSpec], terms: Sequence[Term],
                          learner, settings: TestSettings, T) -> np.ndarray:
    """(n_svem, n_point) standardized predictions from refits to the unpermuted response."""
    Xmat = expand_terms(specs, terms, X_rows).values
    Tmat = expand_terms(specs, terms, T).values
    try:
        return observed_matrix(Xmat, Tmat, y, learner, settings)
    except FitError as exc:
        raise FitError(f"observed refit failed: {exc}", getattr(exc, "job", 0)) from exc


def build_reference_matrix(X_rows, y, specs: Sequence[FactorSpec], terms: Sequence[Term],
                           learner, settings: TestSettings, T) -> np.ndarray:
    """(n_perm, n_point) standardized predictions from refits to permuted responses."""
    Xmat = expand_terms(specs, terms, X_rows).values
    Tmat = expand_terms(specs, terms, T).values
    try:
        return reference_matrix(Xmat, Tmat, y, learner, settings)
    except FitError as exc:
        raise FitError(f"permutation refit failed: {exc}", getattr(exc, "job", 0)) from exc


def standardize_columns(M_ref, M_obs):
    """Center and scale both matrices by the column means and sds of ``M_ref``.

    Columns with zero spread in ``M_ref`` are set to zero in both outputs.
    """
    M_ref = np.asarray(M_ref, dtype=float)
    M_obs = np.atleast_2d(np.asarray(M_obs, dtype=float))
    mean = M_ref.mean(axis=0)
    sd = M_ref.std(axis=0, ddof=1)
    live = sd > 1e-12 * np.maximum(1.0, np.abs(mean))
    safe = np.where(live, sd, 1.0)
    ref = np.where(live, (M_ref - mean) / safe, 0.0)
    obs = np.where(live, (M_obs - mean) / safe, 0.0)
    return ref, obs


def retained_rank(eigenvalues, n_point, percent):
    """Smallest k whose leading eigen-share exceeds ``percent`` (all of them if none does)."""
    share = np.cumsum(eigenvalues) / n_point
    hits = np.flatnonzero(share > percent / 100.0)
    return int(hits[0]) + 1 if hits.size else len(eigenvalues)


def reduced_rank_mahalanobis(M_ref, M_obs, percent=85.0) -> MahalanobisResult:
    """Mahalanobis distances of reference and held-out rows in the leading eigen-subspace."""
    M_ref = np.asarray(M_ref, dtype=float)
    if M_ref.ndim != 2 or M_ref.shape[0] < 2:
        raise ValueError("reference matrix needs at least two rows")
    ref, obs = standardize_columns(M_ref, M_obs)
    if not np.any(ref):
        raise DegenerateReferenceError("standardized reference matrix is all zero")
    n_point = ref.shape[1]
    _, sig, Vt = np.linalg.svd(ref, full_matrices=False)
    rank = int(np.sum(sig > sig[0] * max(ref.shape) * np.finfo(float).eps))
    sig = sig[:rank]
    lam = sig ** 2 / np.sum(sig ** 2) * n_point
    k = retained_rank(lam, n_point, percent)
    Vk = Vt[:k].T
    d_ref = np.sqrt(np.sum((ref @ Vk) ** 2 / lam[:k], axis=1))
    d_obs = np.sqrt(np.sum((obs @ Vk) ** 2 / lam[:k], axis=1))
    return MahalanobisResult(d_ref, d_obs, k, lam)


def _finish(M_obs, M_ref, learner, settings):
    maha = reduced_rank_mahalanobis(M_ref, M_obs, settings.percent)
    p, ref_fit = p_value_from_distances(maha.d_ref, maha.d_obs, settings.reference_family)
    return TestResult(maha.d_ref, maha.d_obs, maha.k, maha.eigenvalues, ref_fit, p,
                      settings, canonical_learner(learner), M_obs, M_ref)


def whole_model_test_matrices(Xmat, Tmat, y, learner, settings: TestSettings) -> TestResult:
    """Run the test on pre-expanded design (``Xmat``) and evaluation (``Tmat``) matrices."""
    M_obs = observed_matrix(Xmat, Tmat, y, learner, settings)
    M_ref = reference_matrix(Xmat, Tmat, y, learner, settings)
    return _finish(M_obs, M_ref, learner, settings)


def whole_model_test(X_rows, y, specs: Sequence[FactorSpec], terms: Sequence[Term],
                     learner="fs", settings: TestSettings | None = None) -> TestResult:
    """Test H0: the response surface is constant over the factor space.

    Parameters
    ----------
    X_rows : mapping of factor name -> column (e.g. a DataFrame) for the design.
    y : response vector without missing values.
    specs, terms : factor declarations and candidate terms.
    learner : ``"fs"`` (forward selection) or ``"lasso"``.
    settings : :class:`TestSettings`; defaults follow the usual recommendations.
    """
    settings = settings or TestSettings()
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("response has missing values; delete those rows first")
    T = evaluation_points(specs, settings)
    Xmat = expand_terms(specs, terms, X_rows).values
    Tmat = expand_terms(specs, terms, T).values
    if Xmat.shape[0] != y.size:
        raise ValueError("design rows and response differ in length")
    return whole_model_test_matrices(Xmat, Tmat, y, learner, settings)
