"""Dataset ingestion, multi-response test runs, and CSV / SVG report emission."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ._errors import IngestionError, SvemError
from ._seeding import derive_seed
from .factors import FactorSpec, Term, load_config
from .learners import canonical_learner
from .whole_model import TestSettings, whole_model_test

log = logging.getLogger(__name__)

MISSING_TOKENS = {"", "na", "nan", "null", "."}


@dataclass
class Dataset:
    """Factor table after global row deletion plus per-response vectors.

    Each response series has its own missing rows dropped; its index points
    into ``factors``.
    """
    factors: pd.DataFrame
    responses: dict[str, pd.Series]
    deletions: dict[str, int] = field(default_factory=dict)

    def response_data(self, name):
        y = self.responses[name]
        return self.factors.loc[y.index].reset_index(drop=True), y.to_numpy(float)


def _missing(col: pd.Series):
    return col.str.strip().str.lower().isin(MISSING_TOKENS)


def ingest_dataset(path, specs: Sequence[FactorSpec],
                   responses: Sequence[str] | None = None) -> Dataset:
    """Read a CSV with a header row and apply row deletion for missing values.

    Rows missing any factor value are dropped for every response; rows missing
    one response are dropped for that response only.
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise IngestionError(f"{path}: empty file") from None
    raw.columns = [c.strip() for c in raw.columns]
    names = [s.name for s in specs]
    for col in names:
        if col not in raw.columns:
            raise IngestionError(f"{path}: no column for factor {col!r}")
    if responses is None:
        responses = [c for c in raw.columns if c not in names]
    for col in responses:
        if col not in raw.columns:
            raise IngestionError(f"{path}: no response column {col!r}")

    factor_missing = np.zeros(len(raw), dtype=bool)
    parsed = {}
    for spec in specs:
        col = raw[spec.name]
        miss = _missing(col).to_numpy()
        factor_missing |= miss
        if spec.role == "categorical":
            vals = col.str.strip()
            bad = ~miss & ~vals.isin(spec.levels).to_numpy()
            if bad.any():
                r = int(np.flatnonzero(bad)[0])
                raise IngestionError(f"row {r + 1}, column {spec.name!r}: "
                                     f"unknown level {vals.iloc[r]!r}")
            parsed[spec.name] = vals
        else:
            parsed[spec.name] = _numeric(col, miss, spec.name)

    factors = pd.DataFrame(parsed)[~factor_missing]
    deletions = {"factors": int(factor_missing.sum())}
    if factor_missing.any():
        log.info("deleted %d rows with missing factor values", factor_missing.sum())
    if factors.empty:
        raise IngestionError(f"{path}: no complete rows remain")

    out = {}
    for name in responses:
        col = raw[name]
        miss = _missing(col).to_numpy()
        y = pd.Series(_numeric(col, miss, name), index=raw.index)[~factor_missing & ~miss]
        deletions[name] = int((~factor_missing & miss).sum())
        if deletions[name]:
            log.info("response %s: deleted %d rows with missing values", name, deletions[name])
        if y.empty:
            raise IngestionError(f"{path}: response {name!r} has no complete rows")
        out[name] = y
    return Dataset(factors, out, deletions)


def _numeric(col, miss, name):
    vals = pd.to_numeric(col.where(~miss, None), errors="coerce").to_numpy(float)
    bad = ~miss & ~np.isfinite(vals)
    if bad.any():
        r = int(np.flatnonzero(bad)[0])
        raise IngestionError(f"row {r + 1}, column {name!r}: cannot parse {col.iloc[r]!r}")
    return vals


def format_p(p, alpha=0.05):
    """Four decimals, ``<.0001`` below that, ``*`` marks p < alpha."""
    text = "<.0001" if p < 1e-4 else f"{p:.4f}"
    return text + ("*" if p < alpha else "")


@dataclass
class RunConfig:
    data: Path
    config: Path
    responses: list[str]
    learner: str = "fs"
    settings: TestSettings = field(default_factory=TestSettings)
    out: Path = Path("svem_out")
    seed: int = 0


@dataclass
class RunReport:
    results: dict
    errors: dict
    files: list[Path]

    @property
    def exit_code(self):
        return 0 if not self.errors else 1


def _run_one(args):
    name, X, y, specs, terms, learner, settings = args
    try:
        return name, whole_model_test(X, y, specs, terms, learner, settings), None
    except (SvemError, ValueError, ArithmeticError) as exc:
        return name, None, f"{type(exc).__name__}: {exc}"


def run_responses(dataset: Dataset, names, specs, terms, learner, settings: TestSettings,
                  seed, n_jobs=1):
    """Run the test per response with seeds derived from ``(seed, response index)``."""
    jobs = []
    for i, name in enumerate(names):
        X, y = dataset.response_data(name)
        jobs.append((name, X, y, specs, terms, learner,
                     replace(settings, seed=derive_seed(seed, i))))
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(n_jobs, len(jobs))) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(j) for j in jobs]
    results = {n: r for n, r, e in done if e is None}
    errors = {n: e for n, _, e in done if e is not None}
    return results, errors


def run_test_command(cfg: RunConfig, n_jobs=1, plot=True) -> RunReport:
    """Run every configured response and write the report files into ``cfg.out``."""
    specs, terms = load_config(Path(cfg.config).read_text())
    learner = canonical_learner(cfg.learner)
    dataset = ingest_dataset(cfg.data, specs, cfg.responses)
    results, errors = run_responses(dataset, cfg.responses, specs, terms, learner,
                                    cfg.settings, cfg.seed, n_jobs)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    rows = []
    for name in cfg.responses:
        if name not in results:
            continue
        r = results[name]
        rows.append({"response": name, "n": len(dataset.responses[name]),
                     "p_value": f"{r.p_value:.6g}", "p_display": format_p(r.p_value),
                     "learner": learner, "family": r.family, "k": r.k})
    files.append(out / "pvalues.csv")
    pd.DataFrame(rows, columns=["response", "n", "p_value", "p_display", "learner",
                                "family", "k"]).to_csv(files[-1], index=False)

    dist = [r.plot_data().assign(response=name)[["response", "group", "distance"]]
            for name, r in ((n, results[n]) for n in cfg.responses if n in results)]
    files.append(out / "distances.csv")
    (pd.concat(dist, ignore_index=True) if dist else
     pd.DataFrame(columns=["response", "group", "distance"])).to_csv(
        files[-1], index=False, float_format="%.10g")

    if errors:
        files.append(out / "errors.csv")
        pd.DataFrame(list(errors.items()), columns=["response", "error"]).to_csv(
            files[-1], index=False)

    summary = {
        "data": str(cfg.data), "config": str(cfg.config), "learner": learner,
        "seed": cfg.seed, "settings": cfg.settings.to_dict(),
        "deletions": dataset.deletions,
        "responses": {
            name: {"p_value": r.p_value, "family": r.family, "params": r.params,
                   "failed_families": [f for f, _ in r.reference.failed],
                   "k": r.k, "n": len(dataset.responses[name])}
            for name, r in results.items()
        },
        "errors": errors,
    }
    files.append(out / "summary.json")
    files[-1].write_text(json.dumps(summary, indent=2, sort_keys=True))

    if plot and results:
        from .plots import distance_panel
        files.append(out / "distances.svg")
        distance_panel({n: results[n] for n in cfg.responses if n in results}, files[-1])
    return RunReport(results, errors, files)
