"""
Reference distributions for permutation distances, and the classical
whole-model F test.

The sinh-arcsinh (SHASH) family is parametrized as

    F(x) = Phi(sinh(delta * asinh((x - xi) / eta) - eps))

with location ``xi``, scale ``eta > 0``, skewness ``eps`` and tailweight
``delta > 0``. ``eps = 0, delta = 1`` is the normal distribution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from ._errors import ConvergenceError, DegenerateSampleError, DomainError

FAMILIES = ("shash", "weibull", "gamma")
NM_FATOL = 1e-9
NM_MAXITER = 2000


def normal_cdf(x):
    return special.ndtr(x)


@dataclass(frozen=True)
class ShashParams:
    xi: float
    eta: float
    eps: float
    delta: float

    def __post_init__(self):
        if not (self.eta > 0 and self.delta > 0):
            raise ValueError("SHASH scale and tailweight must be positive")


def shash_cdf(x, p: ShashParams):
    z = (np.asarray(x, dtype=float) - p.xi) / p.eta
    # sinh overflows to +-inf far in the tails, where the CDF is exactly 0 or 1
    with np.errstate(over="ignore"):
        return normal_cdf(np.sinh(p.delta * np.arcsinh(z) - p.eps))


def shash_logpdf(x, p: ShashParams):
    z = (np.asarray(x, dtype=float) - p.xi) / p.eta
    w = p.delta * np.arcsinh(z) - p.eps
    s = np.sinh(w)
    # log cosh(w), overflow-safe
    logcosh = np.logaddexp(w, -w) - np.log(2.0)
    return (np.log(p.delta) - np.log(p.eta) - 0.5 * np.log(2 * np.pi)
            + logcosh - 0.5 * np.log1p(z * z) - 0.5 * s * s)


def shash_pdf(x, p: ShashParams):
    return np.exp(shash_logpdf(x, p))


def shash_ppf(u, p: ShashParams):
    z = special.ndtri(np.asarray(u, dtype=float))
    return p.xi + p.eta * np.sinh((np.arcsinh(z) + p.eps) / p.delta)


def shash_rvs(p: ShashParams, size, rng):
    z = rng.standard_normal(size)
    return p.xi + p.eta * np.sinh((np.arcsinh(z) + p.eps) / p.delta)


def _check_samples(samples, min_n=10, positive=False):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < min_n:
        raise DegenerateSampleError(f"need at least {min_n} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSampleError("samples must be finite")
    if positive and np.any(x < 0):
        raise DomainError("positive-support family fitted to negative samples")
    if np.ptp(x) <= 1e-12 * max(1.0, np.abs(x).max()):
        raise DegenerateSampleError("samples have zero spread")
    return x


def shash_start(x):
    q25, q50, q75 = np.percentile(x, [25, 50, 75])
    eta0 = (q75 - q25) / 1.35
    if eta0 <= 0:
        eta0 = np.std(x)
    return ShashParams(q50, eta0, 0.0, 1.0)


def shash_loglik(x, p: ShashParams):
    return float(np.sum(shash_logpdf(x, p)))


def shash_fit_mle(samples) -> ShashParams:
    """Maximum-likelihood SHASH fit by Nelder-Mead on (xi, log eta, eps, log delta)."""
    x = _check_samples(samples)
    start = shash_start(x)
    theta0 = np.array([start.xi, np.log(start.eta), start.eps, np.log(start.delta)])

    def nll(theta):
        xi, leta, eps, ldelta = theta
        if abs(leta) > 700 or abs(ldelta) > 50:
            return np.inf
        with np.errstate(over="ignore", invalid="ignore"):
            val = -np.sum(shash_logpdf(x, ShashParams(xi, np.exp(leta), eps, np.exp(ldelta))))
        return val if np.isfinite(val) else np.inf

    res = optimize.minimize(
        nll, theta0, method="Nelder-Mead",
        options={"fatol": NM_FATOL, "xatol": np.inf, "maxiter": NM_MAXITER,
                 "maxfev": 20 * NM_MAXITER})
    if not res.success or not np.isfinite(res.fun):
        raise ConvergenceError(f"SHASH maximum likelihood failed: {res.message}")
    xi, leta, eps, ldelta = res.x
    return ShashParams(float(xi), float(np.exp(leta)), float(eps), float(np.exp(ldelta)))


@dataclass(frozen=True)
class WeibullParams:
    shape: float
    scale: float


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float


def weibull_cdf(x, p: WeibullParams):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return -np.expm1(-((x / p.scale) ** p.shape))


def gamma_cdf(x, p: GammaParams):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return special.gammainc(p.shape, x / p.scale)


def _scipy_fit(dist, x):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            shape, _, scale = dist.fit(x, floc=0.0)
        except Exception as exc:  # scipy raises a mix of types on failure
            raise ConvergenceError(f"{dist.name} fit failed: {exc}") from None
    if not (np.isfinite(shape) and np.isfinite(scale) and shape > 0 and scale > 0):
        raise ConvergenceError(f"{dist.name} fit returned invalid parameters")
    return float(shape), float(scale)


def weibull_fit_mle(samples) -> WeibullParams:
    x = _check_samples(samples, positive=True)
    return WeibullParams(*_scipy_fit(stats.weibull_min, x))


def gamma_fit_mle(samples) -> GammaParams:
    x = _check_samples(samples, positive=True)
    return GammaParams(*_scipy_fit(stats.gamma, x))


_FITTERS = {
    "shash": (shash_fit_mle, shash_cdf),
    "weibull": (weibull_fit_mle, weibull_cdf),
    "gamma": (gamma_fit_mle, gamma_cdf),
}


@dataclass(frozen=True)
class ReferenceFit:
    family: str
    params: object
    failed: tuple = field(default_factory=tuple)

    def cdf(self, x):
        return _FITTERS[self.family][1](x, self.params)


def fit_reference(samples, family="shash") -> ReferenceFit:
    """Fit ``family``, falling back along shash -> weibull -> gamma on failure."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    failed = []
    for fam in FAMILIES[FAMILIES.index(family):]:
        try:
            params = _FITTERS[fam][0](samples)
        except (ConvergenceError, DomainError) as exc:
            failed.append((fam, str(exc)))
            continue
        return ReferenceFit(fam, params, tuple(failed))
    raise ConvergenceError("every reference family failed: " +
                           "; ".join(f"{f}: {m}" for f, m in failed))


def p_value_from_distances(d_ref, d_obs, family="shash"):
    """``1 - median(CDF(d_obs))`` under the distribution fitted to ``d_ref``."""
    fit = fit_reference(d_ref, family)
    cdf = fit.cdf(np.asarray(d_obs, dtype=float))
    p = float(np.clip(1.0 - np.median(cdf), 0.0, 1.0))
    return p, fit


def f_sf(x, d1, d2):
    """Upper tail of the F(d1, d2) distribution via the regularized incomplete beta."""
    x = np.asarray(x, dtype=float)
    return special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * np.maximum(x, 0.0)))


def f_cdf(x, d1, d2):
    return 1.0 - f_sf(x, d1, d2)


def anova_whole_model_f(X, y):
    """Classical ANOVA whole-model test for an OLS fit with intercept.

    Returns ``(F, p)`` where ``F = [SSR / (p - 1)] / [SSE / (n - p)]``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n <= k:
        raise ValueError(f"insufficient error degrees of freedom (n={n}, p={k})")
    if k < 2:
        raise ValueError("need at least one column besides the intercept")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta
    ssr = float(np.sum((fitted - y.mean()) ** 2))
    sse = float(np.sum((y - fitted) ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    # round-off floor for a response that is constant up to representation error
    floor = (n * np.finfo(float).eps * max(float(np.abs(y).max()), np.finfo(float).tiny)) ** 2
    if sst <= floor or ssr <= 1e-24 * sst:
        return 0.0, 1.0
    if sse <= 0.0:
        return np.inf, 0.0
    F = (ssr / (k - 1)) / (sse / (n - k))
    return float(F), float(f_sf(F, k - 1, n - k))
