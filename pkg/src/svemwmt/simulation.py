"""
Monte Carlo power studies on a three-factor central composite design, and a
synthetic mixture-process dataset for worked examples.

Scenarios (noise is standard normal throughout):

* 1 -- ``y = beta * (x1 + x2 + x1*x2)``; the ensembles use the full
  response-surface candidate set.
* 2 -- same response; the ensembles only see the true reduced model.
* 3 -- ``y = beta * x3``; the ensembles use the full response surface.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np
import pandas as pd

from ._seeding import derive_seed
from .distributions import anova_whole_model_f
from .ensemble import EnsembleModel, svem_predict
from .factors import FactorSpec, expand_terms, load_config, parse_terms
from .points import sample_points
from .whole_model import TestSettings, evaluation_points, whole_model_test_matrices

log = logging.getLogger(__name__)

ALPHA = 0.05
METHODS = ("svem_fs", "svem_lasso", "anova_full", "anova_reduced")
FULL_RSM = ["Intercept", "x1", "x2", "x3", "x1*x1", "x2*x2", "x3*x3",
            "x1*x2", "x1*x3", "x2*x3"]
REDUCED = {1: ["Intercept", "x1", "x2", "x1*x2"],
           2: ["Intercept", "x1", "x2", "x1*x2"],
           3: ["Intercept", "x3"]}

# reduced settings for desk-scale power runs
DESK_SETTINGS = TestSettings(n_perm=50, n_point=500, n_boot=100)
DESK_TRIALS = 300


def rotatable_alpha(n_factorial=8):
    return n_factorial ** 0.25


def ccd_design(alpha_mode="face_centered", n_center=2) -> pd.DataFrame:
    """Three-factor CCD in coded units: 8 corners, 6 axial points, ``n_center`` centers."""
    if alpha_mode == "rotatable":
        a = rotatable_alpha(8)
    elif alpha_mode == "face_centered":
        a = 1.0
    else:
        raise ValueError("alpha_mode must be 'rotatable' or 'face_centered'")
    if n_center < 1:
        raise ValueError("n_center must be >= 1")
    corners = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)],
                       dtype=float)
    axial = np.vstack([s * a * np.eye(3)[d] for d in range(3) for s in (-1, 1)])
    center = np.zeros((n_center, 3))
    return pd.DataFrame(np.vstack([corners, axial, center]), columns=["x1", "x2", "x3"])


def ccd_specs(design: pd.DataFrame) -> list[FactorSpec]:
    """Continuous specs spanning the design's coded range on each axis."""
    a = float(np.abs(design[["x1", "x2", "x3"]].to_numpy()).max())
    return [FactorSpec(f"x{i}", "continuous", -a, a) for i in (1, 2, 3)]


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: int
    beta: float
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.scenario not in (1, 2, 3):
            raise ValueError("scenario must be 1, 2 or 3")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.noise_sd != 1.0:
            raise ValueError("scenarios use unit noise")

    @property
    def candidate(self):
        """Candidate set handed to the ensemble arms."""
        return "true_reduced" if self.scenario == 2 else "full_rsm"

    def svem_terms(self):
        return FULL_RSM if self.candidate == "full_rsm" else REDUCED[self.scenario]


@dataclass(frozen=True)
class PowerPoint:
    beta: float
    method: str
    rejections: int
    trials: int

    @property
    def power(self):
        return self.rejections / self.trials

    @property
    def standard_error(self):
        p = self.power
        return float(np.sqrt(p * (1 - p) / self.trials))


def scenario_signal(design: pd.DataFrame, spec: ScenarioSpec) -> np.ndarray:
    x1, x2, x3 = (design[c].to_numpy(dtype=float) for c in ("x1", "x2", "x3"))
    if spec.scenario == 3:
        return spec.beta * x3
    return spec.beta * (x1 + x2 + x1 * x2)


def simulate_response(design: pd.DataFrame, spec: ScenarioSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return scenario_signal(design, spec) + spec.noise_sd * rng.standard_normal(len(design))


def _trial(args):
    spec, methods, settings, seed, design, t = args
    specs = ccd_specs(design)
    y = simulate_response(design, spec, derive_seed(seed, 0, t))
    test_settings = replace(settings, seed=derive_seed(seed, 1, t))
    out = {}
    svem_mats = None
    for method in methods:
        if method.startswith("svem"):
            if svem_mats is None:
                terms = parse_terms(spec.svem_terms(), specs)
                T = evaluation_points(specs, test_settings)
                svem_mats = (expand_terms(specs, terms, design).values,
                             expand_terms(specs, terms, T).values)
            learner = "fs" if method == "svem_fs" else "lasso"
            res = whole_model_test_matrices(*svem_mats, y, learner, test_settings)
            out[method] = res.p_value
        else:
            names = FULL_RSM if method == "anova_full" else REDUCED[spec.scenario]
            X = expand_terms(specs, parse_terms(names, specs), design).values
            out[method] = anova_whole_model_f(X, y)[1]
    return out


def power_trials(spec: ScenarioSpec, methods=("svem_fs", "anova_full"), trials=DESK_TRIALS,
                 settings: TestSettings = DESK_SETTINGS, seed=0, design=None,
                 n_jobs=1) -> pd.DataFrame:
    """Per-trial p-values, one column per method.

    Trial ``t`` draws its response and test seed from ``(seed, t)``, so the
    table does not depend on ``n_jobs``.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    design = ccd_design() if design is None else design
    jobs = [(spec, tuple(methods), settings, seed, design, t) for t in range(trials)]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            rows = list(pool.map(_trial, jobs, chunksize=max(1, trials // (4 * n_jobs))))
    else:
        rows = [_trial(j) for j in jobs]
    return pd.DataFrame(rows, columns=list(methods))


def estimate_power(spec: ScenarioSpec, methods=("svem_fs", "anova_full"),
                   trials=DESK_TRIALS, settings: TestSettings = DESK_SETTINGS, seed=0,
                   design=None, n_jobs=1, alpha=ALPHA) -> list[PowerPoint]:
    """Rejection counts at level ``alpha`` for each method."""
    pvals = power_trials(spec, methods, trials, settings, seed, design, n_jobs)
    return [PowerPoint(spec.beta, m, int((pvals[m] < alpha).sum()), trials)
            for m in methods]


def power_curve(scenario, betas, methods=("svem_fs", "anova_full"), trials=DESK_TRIALS,
                settings: TestSettings = DESK_SETTINGS, seed=0, design=None,
                n_jobs=1) -> pd.DataFrame:
    """Power table with columns beta, method, rejections, trials."""
    rows = []
    for i, beta in enumerate(betas):
        pts = estimate_power(ScenarioSpec(scenario, float(beta)), methods, trials,
                             settings, derive_seed(seed, i), design, n_jobs)
        log.info("beta=%g: %s", beta, ", ".join(f"{p.method}={p.power:.3f}" for p in pts))
        rows.extend(pts)
    return pd.DataFrame([(p.beta, p.method, p.rejections, p.trials) for p in rows],
                        columns=["beta", "method", "rejections", "trials"])


def sample_surface(model: EnsembleModel, T, seed) -> np.ndarray:
    """One normal draw per point with the ensemble mean and spread."""
    summary = svem_predict(model, T)
    rng = np.random.default_rng(seed)
    return summary.f_hat + summary.s_hat * rng.standard_normal(len(summary.f_hat))


# --------------------------------------------------------------------------
# synthetic mixture-process study
# --------------------------------------------------------------------------

LNP_RESPONSES = ("Potency", "Size", "PDI")
LNP_DATA_SEED = 20240313


def lnp_config_text() -> str:
    return resources.files("svemwmt").joinpath("data/lnp.yaml").read_text()


def lnp_config():
    return load_config(lnp_config_text())


def simulate_lnp(seed=LNP_DATA_SEED, n_runs=23) -> pd.DataFrame:
    """A 23-run mixture-process table with two active responses and one noise response.

    ``Size`` depends strongly on the factors, ``Potency`` moderately, and
    ``PDI`` is independent noise.
    """
    specs, _ = lnp_config()
    rng = np.random.default_rng(seed)
    df = sample_points(specs, n_runs, derive_seed(seed, 0))
    lipid = specs[4]
    df[lipid.name] = np.asarray(lipid.levels, dtype=object)[
        rng.permutation(np.arange(n_runs) % len(lipid.levels))]

    P, H, I, C = (df[c].to_numpy(float) for c in ("PEG", "Helper", "Ionizable", "Cholesterol"))
    npr = specs[5].scale(df["N_P_ratio"].to_numpy(float))
    fr = specs[6].scale(df["flow rate"].to_numpy(float))
    kind = df[lipid.name].map({"H101": 1.0, "H102": -0.5, "H103": -0.5}).to_numpy(float)

    df["Potency"] = (5.0 + 10.0 * I + 2.0 * npr - 1.5 * npr ** 2 + 1.0 * kind + 25.0 * P
                     + 0.7 * rng.standard_normal(n_runs))
    df["Size"] = (80.0 + 100.0 * H - 60.0 * I + 15.0 * fr + 10.0 * fr ** 2 + 5.0 * kind
                  + 3.0 * rng.standard_normal(n_runs))
    df["PDI"] = 0.15 + 0.03 * rng.standard_normal(n_runs)
    return df
