"""
Observation-weighted linear base learners.

Both learners train on the training-weighted response and pick their tuning
step (path length or penalty) by the validation-weighted SSE on the same rows.
The ``*_batch`` functions fit many (y, weights) problems against one shared
model matrix at once; the single-fit functions are thin wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._errors import ConvergenceError, SingularSystemError
from .weights import WeightPair

N_LAMBDA = 100
LAMBDA_RATIO = 1e-4
CD_TOL = 1e-7
CD_MAX_SWEEPS = 100_000
COLLINEAR_TOL = 1e-10
JITTER = 1e-10

LEARNERS = ("forward_selection", "lasso")
_ALIASES = {"fs": "forward_selection", "forward_selection": "forward_selection",
            "lasso": "lasso"}


def canonical_learner(name):
    try:
        return _ALIASES[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown learner {name!r}; use 'fs' or 'lasso'") from None


@dataclass(frozen=True)
class FitResult:
    """One fitted member. ``coefficients`` includes the intercept column."""
    coefficients: np.ndarray
    intercept: float
    tuning_index: int

    def predict(self, X):
        return np.asarray(X) @ self.coefficients


def intercept_index(X):
    X = np.asarray(X)
    hits = np.flatnonzero((X == 1.0).all(axis=0))
    if hits.size == 0:
        raise ValueError("model matrix has no intercept (all-ones) column")
    return int(hits[0])


def weighted_least_squares(X, y, w):
    """Minimize ``sum w_i (y_i - x_i' b)^2`` via the normal equations.

    A ridge of ``1e-10 * trace / k`` is added when the weighted Gram matrix
    is numerically singular.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if X.shape[1] < 1:
        raise ValueError("need at least one column")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    A = X.T @ (w[:, None] * X)
    rhs = X.T @ (w * y)
    k = A.shape[0]
    if np.linalg.cond(A) < 1.0 / (k * np.finfo(float).eps * 1e2):
        return np.linalg.solve(A, rhs)
    A = A + JITTER * np.trace(A) / k * np.eye(k)
    if not np.isfinite(np.linalg.cond(A)) or np.linalg.cond(A) > 1e15:
        raise SingularSystemError("weighted normal equations are singular")
    return np.linalg.solve(A, rhs)


# --------------------------------------------------------------------------
# forward selection
# --------------------------------------------------------------------------

def _as_batch(Y, Wt, Wv):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Wt = np.broadcast_to(np.asarray(Wt, dtype=float), Y.shape)
    Wv = np.broadcast_to(np.asarray(Wv, dtype=float), Y.shape)
    return Y, Wt, Wv


def _triangular_coefs(Rfull, cy, order, stop):
    """Back out coefficients of the path models ending at step ``stop`` (per problem)."""
    m, S, p = Rfull.shape
    ar = np.arange(m)
    idx = np.where(order >= 0, order, 0)
    R = np.take_along_axis(Rfull, np.broadcast_to(idx[:, None, :], (m, S, S)), axis=2)
    R = np.triu(R)
    keep = np.arange(S)[None, :] <= stop[:, None]
    R = np.where(keep[:, :, None] & keep[:, None, :], R, 0.0)
    R[:, np.arange(S), np.arange(S)] = np.where(keep, R[:, np.arange(S), np.arange(S)], 1.0)
    rhs = np.where(keep, cy, 0.0)
    beta = np.linalg.solve(R, rhs[:, :, None])[:, :, 0]
    coef = np.zeros((m, p))
    for s in range(S):
        use = keep[:, s] & (order[:, s] >= 0)
        coef[ar[use], order[use, s]] += beta[use, s]
    return coef


def forward_selection_batch(X, Y, Wt, Wv, max_steps=None, return_path=False):
    """Forward selection for ``m`` weighted problems sharing the model matrix ``X``.

    Parameters
    ----------
    X : (n, p) array with an intercept column.
    Y, Wt, Wv : (m, n) arrays of responses, training and validation weights.
    max_steps : cap on added terms, default ``min(p - 1, n - 1)``.
    return_path : also return per-step coefficients and SSEs.

    Returns
    -------
    coef : (m, p) coefficients of the validation-selected path model.
    tuning : (m,) number of terms added beyond the intercept.
    path : dict, only when ``return_path`` is set.
    """
    X = np.asarray(X, dtype=float)
    Y, Wt, Wv = _as_batch(Y, Wt, Wv)
    m, n = Y.shape
    p = X.shape[1]
    icpt = intercept_index(X)
    if max_steps is None:
        max_steps = min(p - 1, n - 1)
    S = max_steps + 1
    ar = np.arange(m)

    sw = np.sqrt(Wt)
    Xw = sw[:, :, None] * X[None, :, :]
    yw = sw * Y
    norm2 = np.einsum("mnp,mnp->mp", Xw, Xw)
    Z = Xw.copy()
    r = yw.copy()
    Q = np.zeros((m, n, S))
    Rfull = np.zeros((m, S, p))
    cy = np.zeros((m, S))
    order = np.full((m, S), -1, dtype=np.intp)
    active = np.zeros((m, p), dtype=bool)
    alive = np.ones(m, dtype=bool)
    tsse = np.full((m, S), np.inf)
    vsse = np.full((m, S), np.inf)

    for s in range(S):
        if s == 0:
            j = np.full(m, icpt, dtype=np.intp)
        else:
            zz = np.einsum("mnp,mnp->mp", Z, Z)
            zr = np.einsum("mnp,mn->mp", Z, r)
            ok = ~active & (zz > COLLINEAR_TOL * norm2)
            gain = np.where(ok, zr ** 2 / np.where(ok, zz, 1.0), -np.inf)
            j = np.argmax(gain, axis=1)
            alive &= ok[ar, j]
            if not alive.any():
                break
        z = Z[ar, :, j]
        if s:
            Qs = Q[:, :, :s]
            z = z - np.einsum("mns,ms->mn", Qs, np.einsum("mns,mn->ms", Qs, z))
        nz = np.sqrt(np.einsum("mn,mn->m", z, z))
        q = np.where(alive[:, None], z / np.where(nz > 0, nz, 1.0)[:, None], 0.0)
        Q[:, :, s] = q
        Rfull[:, s, :] = np.einsum("mn,mnp->mp", q, Xw)
        qr = np.einsum("mn,mn->m", q, r)
        cy[:, s] = qr
        Z -= q[:, :, None] * np.einsum("mn,mnp->mp", q, Z)[:, None, :]
        r -= q * qr[:, None]
        active[ar[alive], j[alive]] = True
        order[alive, s] = j[alive]
        fitted = (yw - r) / sw
        tsse[alive, s] = np.einsum("mn,mn->m", r, r)[alive]
        vsse[alive, s] = np.einsum("mn,mn->m", Wv, (Y - fitted) ** 2)[alive]

    stop = np.argmin(vsse, axis=1)
    coef = _triangular_coefs(Rfull, cy, order, stop)
    if not return_path:
        return coef, stop
    steps = [_triangular_coefs(Rfull, cy, order, np.full(m, s)) for s in range(S)]
    path = {"coefficients": np.stack(steps, axis=1), "order": order,
            "train_sse": tsse, "valid_sse": vsse}
    return coef, stop, path


def forward_selection_fit(X, y, weights: WeightPair, max_steps=None) -> FitResult:
    coef, stop = forward_selection_batch(X, y, weights.train, weights.valid, max_steps)
    icpt = intercept_index(X)
    return FitResult(coef[0], float(coef[0, icpt]), int(stop[0]))


def forward_selection_path(X, y, weights: WeightPair, max_steps=None):
    """Every path model: dict with (steps, p) ``coefficients``, ``order``, SSEs."""
    _, _, path = forward_selection_batch(X, y, weights.train, weights.valid,
                                         max_steps, return_path=True)
    alive = path["order"][0] >= 0
    return {key: val[0][alive] for key, val in path.items()}


# --------------------------------------------------------------------------
# lasso
# --------------------------------------------------------------------------

@njit(cache=True)
def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True)
def cd_sweep(G, c, lam, beta, Gb, usable):
    """One coordinate-descent sweep on the covariance form; returns max |change|."""
    maxd = 0.0
    p = beta.shape[0]
    for j in range(p):
        if not usable[j]:
            continue
        old = beta[j]
        rho = c[j] - Gb[j] + G[j, j] * old
        new = _soft(rho, lam) / G[j, j]
        d = new - old
        if d != 0.0:
            for k in range(p):
                Gb[k] += G[k, j] * d
            beta[j] = new
            if abs(d) > maxd:
                maxd = abs(d)
    return maxd


@njit(cache=True)
def _cd_solve(G, c, lam, beta, Gb, usable, tol, max_sweeps):
    """Full sweeps alternating with sweeps over the nonzero set until a full sweep settles."""
    sweeps = 0
    active = np.empty_like(usable)
    while sweeps < max_sweeps:
        sweeps += 1
        if cd_sweep(G, c, lam, beta, Gb, usable) < tol:
            return True
        for j in range(beta.shape[0]):
            active[j] = usable[j] and beta[j] != 0.0
        while sweeps < max_sweeps:
            sweeps += 1
            if cd_sweep(G, c, lam, beta, Gb, active) < tol:
                break
    return False


@njit(cache=True)
def _standardize(X, y, w, icpt):
    n, p = X.shape
    W = w.sum()
    ym = (w * y).sum() / W
    ysd = np.sqrt((w * (y - ym) ** 2).sum() / W)
    xm = np.zeros(p)
    xsd = np.zeros(p)
    Zs = np.zeros((n, p))
    usable = np.zeros(p, dtype=np.bool_)
    for j in range(p):
        if j == icpt:
            continue
        mj = (w * X[:, j]).sum() / W
        sj = np.sqrt((w * (X[:, j] - mj) ** 2).sum() / W)
        xm[j] = mj
        xsd[j] = sj
        if sj > 1e-12 * (1.0 + abs(mj)):
            usable[j] = True
            Zs[:, j] = (X[:, j] - mj) / sj
    G = np.zeros((p, p))
    c = np.zeros(p)
    for j in range(p):
        if not usable[j]:
            continue
        c[j] = (w * Zs[:, j] * (y - ym)).sum() / W
        for k in range(j, p):
            if usable[k]:
                g = (w * Zs[:, j] * Zs[:, k]).sum() / W
                G[j, k] = g
                G[k, j] = g
    return ym, ysd, xm, xsd, usable, G, c


@njit(cache=True)
def _to_original(beta, xm, xsd, usable, ym, icpt, out):
    p = beta.shape[0]
    b0 = ym
    for j in range(p):
        out[j] = 0.0
        if usable[j]:
            out[j] = beta[j] / xsd[j]
            b0 -= out[j] * xm[j]
    out[icpt] = b0


@njit(cache=True)
def _lasso_batch_kernel(X, Y, Wt, Wv, icpt, n_lambda, ratio, tol_rel, max_sweeps,
                        coef_out, tune_out, fail_out, path_out, lam_out):
    m, n = Y.shape
    p = X.shape[1]
    keep_path = path_out.shape[0] > 0
    trial = np.zeros(p)
    for b in range(m):
        y = Y[b]
        wv = Wv[b]
        ym, ysd, xm, xsd, usable, G, c = _standardize(X, y, Wt[b], icpt)
        lam_max = 0.0
        for j in range(p):
            if usable[j] and abs(c[j]) > lam_max:
                lam_max = abs(c[j])
        fail_out[b] = -1
        if lam_max <= 0.0 or ysd <= 0.0:
            for j in range(p):
                coef_out[b, j] = 0.0
            coef_out[b, icpt] = ym
            tune_out[b] = 0
            if keep_path:
                for li in range(n_lambda):
                    path_out[b, li, :] = coef_out[b]
            continue
        tol = tol_rel * ysd
        beta = np.zeros(p)
        Gb = np.zeros(p)
        best = np.inf
        for li in range(n_lambda):
            lam = lam_max * ratio ** (li / (n_lambda - 1.0))
            lam_out[b, li] = lam
            done = _cd_solve(G, c, lam, beta, Gb, usable, tol, max_sweeps)
            if not done:
                fail_out[b] = li
                break
            _to_original(beta, xm, xsd, usable, ym, icpt, trial)
            v = 0.0
            for i in range(n):
                e = y[i]
                for j in range(p):
                    e -= X[i, j] * trial[j]
                v += wv[i] * e * e
            if keep_path:
                path_out[b, li, :] = trial
            if v < best:
                best = v
                coef_out[b, :] = trial
                tune_out[b] = li


def lasso_batch(X, Y, Wt, Wv, n_lambda=N_LAMBDA, ratio=LAMBDA_RATIO,
                max_sweeps=CD_MAX_SWEEPS, return_path=False):
    """Weighted Lasso paths for ``m`` problems sharing ``X``.

    Columns are standardized by the training-weighted mean and sd; the
    intercept is unpenalized. The penalty runs geometrically from the
    smallest value that zeroes every slope down to ``ratio`` times that.
    Returns ``(coef, tuning)`` with ``tuning`` the selected penalty index.
    """
    X = np.ascontiguousarray(X, dtype=float)
    Y, Wt, Wv = _as_batch(Y, Wt, Wv)
    Y = np.ascontiguousarray(Y)
    Wt = np.ascontiguousarray(Wt)
    Wv = np.ascontiguousarray(Wv)
    m = Y.shape[0]
    p = X.shape[1]
    icpt = intercept_index(X)
    coef = np.zeros((m, p))
    tune = np.zeros(m, dtype=np.int64)
    fail = np.zeros(m, dtype=np.int64)
    path = np.zeros((m if return_path else 0, n_lambda, p))
    lams = np.zeros((m, n_lambda))
    _lasso_batch_kernel(X, Y, Wt, Wv, icpt, n_lambda, ratio, CD_TOL, max_sweeps,
                        coef, tune, fail, path, lams)
    bad = np.flatnonzero(fail >= 0)
    if bad.size:
        b = int(bad[0])
        exc = ConvergenceError(
            f"coordinate descent did not converge at lambda index {fail[b]} "
            f"(problem {b})", index=int(fail[b]))
        exc.problem = b
        raise exc
    if return_path:
        return coef, tune, {"coefficients": path, "lambdas": lams}
    return coef, tune


def lasso_path_fit(X, y, weights: WeightPair) -> FitResult:
    coef, tune = lasso_batch(X, y, weights.train, weights.valid)
    icpt = intercept_index(X)
    return FitResult(coef[0], float(coef[0, icpt]), int(tune[0]))


def lasso_path(X, y, weights: WeightPair):
    """Full path: dict with (N_LAMBDA, p) ``coefficients`` and ``lambdas``."""
    _, _, path = lasso_batch(X, y, weights.train, weights.valid, return_path=True)
    return {"coefficients": path["coefficients"][0], "lambdas": path["lambdas"][0]}


def lasso_problem(X, y, w):
    """Standardized covariance form ``(G, c, usable, ...)`` of one weighted Lasso problem."""
    X = np.ascontiguousarray(X, dtype=float)
    icpt = intercept_index(X)
    ym, ysd, xm, xsd, usable, G, c = _standardize(
        X, np.asarray(y, dtype=float), np.asarray(w, dtype=float), icpt)
    return dict(icpt=icpt, ym=ym, ysd=ysd, xm=xm, xsd=xsd, usable=usable, G=G, c=c)


def lasso_objective(prob, beta, lam, y, w):
    """Weighted Lasso objective in standardized coordinates."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    syy = (w * (y - prob["ym"]) ** 2).sum() / w.sum()
    quad = 0.5 * (syy - 2 * prob["c"] @ beta + beta @ prob["G"] @ beta)
    return quad + lam * np.abs(beta[prob["usable"]]).sum()


def lasso_fit_at(X, y, w, lam, max_sweeps=CD_MAX_SWEEPS):
    """Weighted Lasso at a single penalty; coefficients on the original scale."""
    prob = lasso_problem(X, y, w)
    p = prob["G"].shape[0]
    beta = np.zeros(p)
    Gb = np.zeros(p)
    tol = CD_TOL * max(prob["ysd"], 1e-300)
    if not _cd_solve(prob["G"], prob["c"], float(lam), beta, Gb, prob["usable"], tol,
                     max_sweeps):
        raise ConvergenceError("coordinate descent did not converge", index=0)
    out = np.zeros(p)
    _to_original(beta, prob["xm"], prob["xsd"], prob["usable"], prob["ym"],
                 prob["icpt"], out)
    return out


def fit_batch(learner, X, Y, Wt, Wv):
    """Dispatch to the batched learner named ``learner``."""
    learner = canonical_learner(learner)
    if learner == "lasso":
        return lasso_batch(X, Y, Wt, Wv)
    return forward_selection_batch(X, Y, Wt, Wv)
