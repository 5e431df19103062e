"""Self-validated ensembles: fit ``n_boot`` reweighted members and summarize their predictions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._errors import ConvergenceError, FitError
from .factors import FactorSpec, Term, expand_terms
from .learners import FitResult, canonical_learner, fit_batch, intercept_index
from .weights import draw_weight_matrix

# upper bound on floats held by one batched learner call
_BATCH_FLOATS = 4_000_000


@dataclass(frozen=True)
class EnsembleModel:
    members: tuple[FitResult, ...]
    columns: tuple[str, ...]
    learner: str
    seed: int
    specs: tuple[FactorSpec, ...] = ()
    terms: tuple[Term, ...] = ()

    @property
    def n_boot(self):
        return len(self.members)

    @property
    def coefficients(self):
        """(n_boot, p) matrix of member coefficients."""
        return np.vstack([m.coefficients for m in self.members])

    def to_dict(self):
        return {
            "learner": self.learner,
            "seed": self.seed,
            "columns": list(self.columns),
            "members": [
                {"tuning_index": m.tuning_index,
                 "coefficients": [float(c) for c in m.coefficients]}
                for m in self.members
            ],
        }

    def dump(self, fh):
        """Write the model as JSON (columns plus per-member coefficients)."""
        json.dump(self.to_dict(), fh, indent=1)


@dataclass(frozen=True)
class PredictionSummary:
    P: np.ndarray
    f_hat: np.ndarray
    s_hat: np.ndarray


def summarize_predictions(P) -> PredictionSummary:
    """Row means and sample standard deviations (divisor ``n_boot - 1``)."""
    P = np.asarray(P, dtype=float)
    f_hat = P.mean(axis=1)
    if P.shape[1] > 1:
        s_hat = P.std(axis=1, ddof=1)
    else:
        s_hat = np.zeros(P.shape[0])
    return PredictionSummary(P, f_hat, s_hat)


def ensemble_coefficients(X, Y, seeds, learner, n_boot):
    """Fit one ensemble per row of ``Y``; member weights come from ``seeds[j]``.

    Returns
    -------
    coef : (J, n_boot, p) array
    tuning : (J, n_boot) array
    """
    X = np.asarray(X, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    J, n = Y.shape
    p = X.shape[1]
    learner = canonical_learner(learner)
    per_fit = max(1, n_boot * n * p)
    chunk = max(1, _BATCH_FLOATS // per_fit)
    coef = np.empty((J, n_boot, p))
    tune = np.empty((J, n_boot), dtype=np.int64)
    for start in range(0, J, chunk):
        stop = min(J, start + chunk)
        Wt, Wv = zip(*(draw_weight_matrix(n, n_boot, seeds[j]) for j in range(start, stop)))
        Wt = np.concatenate(Wt)
        Wv = np.concatenate(Wv)
        Yb = np.repeat(Y[start:stop], n_boot, axis=0)
        try:
            c, t = fit_batch(learner, X, Yb, Wt, Wv)
        except ConvergenceError as exc:
            problem = getattr(exc, "problem", 0)
            err = FitError(f"ensemble {start + problem // n_boot}: {exc}",
                           index=problem % n_boot)
            err.job = start + problem // n_boot
            raise err from exc
        coef[start:stop] = c.reshape(stop - start, n_boot, p)
        tune[start:stop] = t.reshape(stop - start, n_boot)
    return coef, tune


def _check_response(y):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("response must be a non-empty vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("response has missing or non-finite values; "
                         "delete those rows before fitting")
    return y


def svem_fit(X_rows, y, specs: Sequence[FactorSpec], terms: Sequence[Term],
             learner="fs", n_boot=200, seed=0) -> EnsembleModel:
    """Fit a self-validated ensemble of ``n_boot`` members.

    Member ``b`` is trained with iteration ``b`` of the weight stream seeded
    by ``seed``, so the model is fully determined by its inputs.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    y = _check_response(y)
    mm = expand_terms(specs, terms, X_rows)
    if mm.values.shape[0] != y.size:
        raise ValueError("factor rows and response differ in length")
    coef, tune = ensemble_coefficients(mm.values, y[None, :], [seed], learner, n_boot)
    icpt = intercept_index(mm.values)
    members = tuple(FitResult(coef[0, b], float(coef[0, b, icpt]), int(tune[0, b]))
                    for b in range(n_boot))
    return EnsembleModel(members, tuple(mm.columns), canonical_learner(learner),
                         int(seed), tuple(specs), tuple(terms))


def svem_predict(model: EnsembleModel, T) -> PredictionSummary:
    mm = expand_terms(model.specs, model.terms, T)
    return summarize_predictions(mm.values @ model.coefficients.T)
