"""
Study factors, candidate model terms, and model-matrix expansion.

Factors are declared with one of three roles:

* ``mixture`` -- a component proportion with bounds; all mixture factors of a
  study sum to one.
* ``continuous`` -- a process variable with a range. Values are mapped linearly
  from the declared range onto [-1, 1] before any term is evaluated.
* ``categorical`` -- a nominal factor with two or more levels, expanded with
  sum-to-zero (effects) coding into ``L - 1`` columns per term mention.

Terms are written in the usual DOE notation, e.g. ``"PEG * Helper"``,
``"N_P_ratio * N_P_ratio"`` or ``"Scheffe Cubic(PEG, Helper)"``. The
JMP-style decorations ``":PEG & Mixture"`` and ``":flow rate & RS"`` are
accepted and ignored.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import yaml

from ._errors import EvaluationError, SpecError

ROLES = ("mixture", "continuous", "categorical")
TERM_KINDS = ("intercept", "main", "interaction", "power", "scheffe_cubic")

_RANGE_TOL = 1e-9


@dataclass(frozen=True)
class FactorSpec:
    name: str
    role: str
    low: float | None = None
    high: float | None = None
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise SpecError(f"factor {self.name!r}: unknown role {self.role!r}")
        if self.role == "categorical":
            if len(self.levels) == 0:
                raise SpecError(f"factor {self.name!r}: empty level list")
            if len(set(self.levels)) != len(self.levels) or len(self.levels) < 2:
                raise SpecError(
                    f"factor {self.name!r}: needs at least 2 distinct levels")
        else:
            if self.low is None or self.high is None:
                raise SpecError(f"factor {self.name!r}: missing range")
            if not (math.isfinite(self.low) and math.isfinite(self.high)):
                raise SpecError(f"factor {self.name!r}: non-finite range")
            if not self.low < self.high:
                raise SpecError(f"factor {self.name!r}: inverted range "
                                f"[{self.low}, {self.high}]")
            if self.role == "mixture" and self.low < 0:
                raise SpecError(f"factor {self.name!r}: mixture low bound < 0")

    @property
    def is_ranged(self):
        return self.role != "categorical"

    def scale(self, values):
        """Coded value used in term evaluation (continuous -> [-1, 1])."""
        values = np.asarray(values, dtype=float)
        if self.role == "continuous":
            return 2.0 * (values - self.low) / (self.high - self.low) - 1.0
        return values


@dataclass(frozen=True)
class Term:
    kind: str
    factors: tuple[tuple[str, int], ...] = ()

    @property
    def label(self):
        if self.kind == "intercept":
            return "Intercept"
        if self.kind == "scheffe_cubic":
            a, b = (f for f, _ in self.factors)
            return f"ScheffeCubic({a},{b})"
        parts = []
        for name, power in self.factors:
            parts.extend([name] * power)
        return "*".join(parts)


@dataclass(frozen=True)
class ModelMatrix:
    columns: list[str]
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def intercept_index(self):
        try:
            return self.columns.index("Intercept")
        except ValueError:
            return None


def validate_specs(specs: Sequence[FactorSpec]):
    names = [s.name for s in specs]
    seen = set()
    for n in names:
        if n in seen:
            raise SpecError(f"duplicate factor name {n!r}")
        seen.add(n)
    mix = [s for s in specs if s.role == "mixture"]
    if mix:
        lo = sum(s.low for s in mix)
        hi = sum(s.high for s in mix)
        if lo > 1 + 1e-12 or hi < 1 - 1e-12:
            raise SpecError(
                "mixture bounds do not admit a point summing to 1 "
                f"(sum of lows {lo:g}, sum of highs {hi:g}); offending factors: "
                + ", ".join(s.name for s in mix))
    return list(specs)


def _spec_from_mapping(entry):
    if not isinstance(entry, Mapping) or "name" not in entry:
        raise SpecError(f"factor entry needs a name: {entry!r}")
    name = str(entry["name"])
    role = str(entry.get("role", "")).lower()
    if role == "categorical":
        levels = entry.get("levels") or []
        return FactorSpec(name, role, levels=tuple(str(v) for v in levels))
    rng = entry.get("range")
    if rng is None or len(rng) != 2:
        raise SpecError(f"factor {name!r}: range must be a [low, high] pair")
    try:
        low, high = float(rng[0]), float(rng[1])
    except (TypeError, ValueError):
        raise SpecError(f"factor {name!r}: non-numeric range {rng!r}") from None
    return FactorSpec(name, role, low=low, high=high)


def _load_yaml(config_text):
    try:
        doc = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise SpecError(f"config is not valid YAML: {exc}") from None
    if not isinstance(doc, Mapping) or "factors" not in doc:
        raise SpecError("config must be a mapping with a 'factors' list")
    return doc


def parse_factor_spec(config_text: str) -> list[FactorSpec]:
    """Parse the ``factors`` section of a YAML config into validated specs."""
    doc = _load_yaml(config_text)
    entries = doc["factors"]
    if not isinstance(entries, list) or not entries:
        raise SpecError("'factors' must be a non-empty list")
    return validate_specs([_spec_from_mapping(e) for e in entries])


_INTERCEPT_RE = re.compile(r"^\(?\s*intercept\s*\)?$", re.IGNORECASE)
_SCHEFFE_RE = re.compile(r"^scheffe\s*cubic\s*\((.*),(.*)\)$", re.IGNORECASE)
_DECORATION_RE = re.compile(r"\s*&\s*(mixture|rs)\s*$", re.IGNORECASE)


def _clean_name(token):
    token = token.strip()
    token = _DECORATION_RE.sub("", token)
    return token.lstrip(":").strip()


def parse_term(text: str, specs: Sequence[FactorSpec]) -> Term:
    """Parse one term string against the declared factors."""
    by_name = {s.name: s for s in specs}
    text = " ".join(text.split())
    if _INTERCEPT_RE.match(text):
        return Term("intercept")

    m = _SCHEFFE_RE.match(text)
    if m:
        a, b = _clean_name(m.group(1)), _clean_name(m.group(2))
        for f in (a, b):
            if f not in by_name:
                raise SpecError(f"term {text!r}: unknown factor {f!r}")
            if by_name[f].role != "mixture":
                raise SpecError(
                    f"term {text!r}: Scheffe cubic needs mixture factors, "
                    f"{f!r} is {by_name[f].role}")
        if a == b:
            raise SpecError(f"term {text!r}: Scheffe cubic needs two distinct factors")
        return Term("scheffe_cubic", ((a, 1), (b, 1)))

    counts: dict[str, int] = {}
    for token in text.split("*"):
        name = _clean_name(token)
        if name not in by_name:
            raise SpecError(f"term {text!r}: unknown factor {name!r}")
        counts[name] = counts.get(name, 0) + 1
    for name, power in counts.items():
        if power > 1 and by_name[name].role != "continuous":
            raise SpecError(
                f"term {text!r}: powers are only allowed on continuous factors "
                f"({name!r} is {by_name[name].role})")
    factors = tuple(counts.items())
    if len(factors) == 1:
        kind = "main" if factors[0][1] == 1 else "power"
    else:
        kind = "interaction"
    return Term(kind, factors)


def parse_terms(term_texts: Sequence[str], specs: Sequence[FactorSpec]) -> list[Term]:
    terms = [parse_term(str(t), specs) for t in term_texts]
    keys = [(t.kind, frozenset(t.factors)) for t in terms]
    dup = {t.label for t, k in zip(terms, keys) if keys.count(k) > 1}
    if dup:
        raise SpecError(f"duplicate terms: {sorted(dup)}")
    return terms


def load_config(config_text: str) -> tuple[list[FactorSpec], list[Term]]:
    """Parse a full YAML config with ``factors`` and ``terms`` sections."""
    specs = parse_factor_spec(config_text)
    doc = _load_yaml(config_text)
    texts = doc.get("terms")
    if not texts:
        raise SpecError("config has no 'terms' list")
    return specs, parse_terms(texts, specs)


def effects_coding(n_levels: int) -> np.ndarray:
    """Sum-to-zero coding matrix of shape (n_levels, n_levels - 1)."""
    code = np.zeros((n_levels, n_levels - 1))
    code[: n_levels - 1] = np.eye(n_levels - 1)
    code[-1] = -1.0
    return code


def _column(rows, name):
    try:
        return rows[name]
    except (KeyError, IndexError):
        raise EvaluationError(f"rows have no column for factor {name!r}") from None


def coded_factor_values(specs: Sequence[FactorSpec], rows) -> dict[str, np.ndarray]:
    """Validate ``rows`` and return per-factor coded arrays.

    Ranged factors map to floats (continuous scaled to [-1, 1]); categorical
    factors map to integer level indices.
    """
    coded = {}
    for spec in specs:
        col = np.asarray(_column(rows, spec.name))
        if spec.role == "categorical":
            labels = [str(v) for v in col]
            index = {lev: i for i, lev in enumerate(spec.levels)}
            idx = np.empty(len(labels), dtype=np.intp)
            for r, lab in enumerate(labels):
                if lab not in index:
                    raise EvaluationError(
                        f"row {r}: factor {spec.name!r} has unknown level {lab!r}")
                idx[r] = index[lab]
            coded[spec.name] = idx
            continue
        try:
            vals = col.astype(float)
        except (TypeError, ValueError):
            raise EvaluationError(
                f"factor {spec.name!r}: non-numeric values") from None
        tol = _RANGE_TOL * (spec.high - spec.low)
        bad = ~((vals >= spec.low - tol) & (vals <= spec.high + tol))
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise EvaluationError(
                f"row {r}: factor {spec.name!r} value {vals[r]!r} outside "
                f"[{spec.low}, {spec.high}]")
        coded[spec.name] = spec.scale(vals)
    return coded


def _n_rows(rows):
    if hasattr(rows, "shape"):
        return int(rows.shape[0])
    return len(next(iter(rows.values()))) if len(rows) else 0


def expand_terms(specs: Sequence[FactorSpec], terms: Sequence[Term], rows,
                 n_rows: int | None = None) -> ModelMatrix:
    """Evaluate ``terms`` on each factor-setting row.

    ``rows`` is any mapping from factor name to a column of values (a
    ``pandas.DataFrame`` works). Only factors referenced by the terms need
    to be present.

    Returns
    -------
    ModelMatrix
        One column per term, except that a term mentioning categorical
        factors contributes the product of their ``L - 1`` effect codings.
    """
    by_name = {s.name: s for s in specs}
    used = []
    for t in terms:
        for name, _ in t.factors:
            if name not in by_name:
                raise EvaluationError(f"term {t.label!r}: unknown factor {name!r}")
            if name not in used:
                used.append(name)
    coded = coded_factor_values([by_name[n] for n in used], rows)
    if n_rows is None:
        n_rows = _n_rows(coded) if coded else _n_rows(rows)

    columns, blocks = [], []
    for t in terms:
        if t.kind == "intercept":
            columns.append("Intercept")
            blocks.append(np.ones((n_rows, 1)))
            continue
        if t.kind == "scheffe_cubic":
            (a, _), (b, _) = t.factors
            va, vb = coded[a], coded[b]
            columns.append(t.label)
            blocks.append((va * vb * (va - vb))[:, None])
            continue
        base = np.ones(n_rows)
        labels = [t.label]
        block = base[:, None]
        for name, power in t.factors:
            spec = by_name[name]
            if spec.role == "categorical":
                code = effects_coding(len(spec.levels))[coded[name]]
                block = (block[:, :, None] * code[:, None, :]).reshape(n_rows, -1)
                labels = [f"{lab}[{lev}]" for lab in labels
                          for lev in spec.levels[:-1]]
            else:
                block = block * (coded[name] ** power)[:, None]
        columns.extend(labels)
        blocks.append(block)

    values = np.hstack(blocks) if blocks else np.empty((n_rows, 0))
    meta = {
        "continuous_scaling": "linear map of declared range onto [-1, 1]",
        "categorical_coding": "sum-to-zero effects coding, L-1 columns",
        "terms": [t.label for t in terms],
    }
    return ModelMatrix(columns, values, meta)
