"""Respondent covariates: the published encoding table and a synthetic generator.

Every covariate the estimators consume is declared here with an explicit kind
and numeric coding, so reports can print the encoding and ingestion can reject
unknown categories. Categorical covariates carry labeled categories whose
first entry is the reference level; ordinal and binary covariates are stored
as their numeric codes directly.

Generator frequencies follow the sample's published marginals where those
exist (gender, hukou, age, income, education, employment, household counts);
the remaining covariates use stated assumptions. Draws are independent across
covariates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

# reserved data-quality column, never a model covariate
COMPLETION_SECONDS = "completion_seconds"


@dataclass(frozen=True)
class CovariateDef:
    """One covariate: its kind, coding, and sampling rule for synthetic data.

    kind:
      binary       0/1 integer
      ordinal      integer code from ``codes``
      categorical  labeled category encoded via ``codes`` (reference first)
      continuous   non-negative real
    generator:
      ("bernoulli", p) | ("categorical", probs) | ("uniform", lo, hi)
      | ("bracket_uniform", probs, bounds)   # pick bracket, uniform within
    """

    name: str
    kind: str
    generator: tuple
    categories: tuple[str, ...] = ()
    codes: tuple[float, ...] = ()
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("binary", "ordinal", "categorical", "continuous"):
            raise InputError(f"covariate {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and (not self.categories or len(self.categories) != len(self.codes)):
            raise InputError(f"covariate {self.name!r}: categories/codes mismatch")
        if self.kind == "ordinal" and not self.codes:
            raise InputError(f"covariate {self.name!r}: ordinal needs codes")

    @property
    def reference(self) -> str | None:
        return self.categories[0] if self.categories else None

    def encode(self, raw) -> float:
        """Numeric model value for a raw CSV cell."""
        if self.kind == "categorical":
            label = str(raw)
            if label in self.categories:
                return float(self.codes[self.categories.index(label)])
            # tolerate pre-encoded numeric values on re-ingest
            try:
                value = float(label)
            except ValueError:
                value = None
            if value is not None and value in self.codes:
                return value
            raise InputError(
                f"covariate {self.name!r}: unknown category {raw!r}; "
                f"encoding table: {dict(zip(self.categories, self.codes))}"
            )
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise InputError(f"covariate {self.name!r}: not a number: {raw!r}") from None
        if self.kind == "binary" and value not in (0.0, 1.0):
            raise InputError(f"covariate {self.name!r}: binary values must be 0/1, got {raw!r}")
        if self.kind == "ordinal" and value not in self.codes:
            raise InputError(
                f"covariate {self.name!r}: code {raw!r} not in {list(self.codes)}"
            )
        if not np.isfinite(value):
            raise InputError(f"covariate {self.name!r}: non-finite value")
        return value

    def decode(self, value: float):
        """CSV cell for a numeric model value (labels for categoricals)."""
        if self.kind == "categorical":
            return self.categories[self.codes.index(value)]
        if self.kind in ("binary", "ordinal"):
            return int(value)
        return value

    def sample(self, rng: np.random.Generator) -> float:
        tag = self.generator[0]
        if tag == "bernoulli":
            return float(rng.random() < self.generator[1])
        if tag == "categorical":
            probs = np.asarray(self.generator[1], dtype=float)
            probs = probs / probs.sum()
            return float((self.codes or tuple(range(len(probs))))[rng.choice(len(probs), p=probs)])
        if tag == "uniform":
            lo, hi = self.generator[1], self.generator[2]
            return float(rng.uniform(lo, hi))
        if tag == "bracket_uniform":
            probs = np.asarray(self.generator[1], dtype=float)
            probs = probs / probs.sum()
            lo, hi = self.generator[2][rng.choice(len(probs), p=probs)]
            return float(rng.uniform(lo, hi))
        raise InputError(f"covariate {self.name!r}: unknown generator {tag!r}")


_INCOME_LABELS = ("under_4000", "4000_8000", "8000_12000", "12000_16000", "16000_20000", "above_20000")
_INCOME_SHARES = (0.0381, 0.1657, 0.3657, 0.2133, 0.1410, 0.0762)

DEFAULT_COVARIATES: tuple[CovariateDef, ...] = (
    CovariateDef(
        "income_bracket", "categorical", ("categorical", _INCOME_SHARES),
        categories=_INCOME_LABELS, codes=(1, 2, 3, 4, 5, 6),
        description="monthly income bracket, ordinal code 1-6 (reference under_4000)",
    ),
    CovariateDef(
        "age_years", "continuous",
        ("bracket_uniform", (0.0781, 0.5448, 0.3200, 0.0476, 0.0038, 0.0057),
         ((18, 25), (25, 35), (35, 45), (45, 55), (55, 65), (65, 75))),
        description="age in years",
    ),
    CovariateDef("male", "binary", ("bernoulli", 0.4733), description="1 = male"),
    CovariateDef("driving_license", "binary", ("bernoulli", 0.55), description="1 = holds a license (assumed share)"),
    CovariateDef("urban_hukou", "binary", ("bernoulli", 0.7429), description="1 = urban household registration"),
    CovariateDef("local_hukou", "binary", ("bernoulli", 0.7162), description="1 = local household registration"),
    CovariateDef("married", "binary", ("bernoulli", 0.8266), description="1 = married"),
    CovariateDef(
        "education_level", "ordinal",
        ("categorical", (0.0019, 0.0057, 0.0229, 0.0190, 0.0571, 0.7619, 0.1295)),
        codes=(1, 2, 3, 4, 5, 6, 7),
        description="1 primary ... 7 master's or above",
    ),
    CovariateDef(
        "employment_type", "ordinal",
        ("categorical", (0.0590, 0.1905, 0.6246, 0.0724, 0.0171, 0.0362)),
        codes=(1, 2, 3, 4, 5, 6),
        description="1 public sector, 2 SOE, 3 private, 4 foreign, 5 self-employed, 6 other",
    ),
    CovariateDef(
        "n_children", "ordinal", ("categorical", (0.2095, 0.6381, 0.1238, 0.0267)),
        codes=(0, 1, 2, 3), description="children in household",
    ),
    CovariateDef(
        "n_elderly", "ordinal", ("categorical", (0.7048, 0.1314, 0.1505, 0.0133)),
        codes=(0, 1, 2, 3), description="elderly in household",
    ),
    CovariateDef("housework", "binary", ("bernoulli", 0.5), description="1 = primary housework responsibility (assumed share)"),
    CovariateDef("commuting_cost", "continuous", ("uniform", 0.0, 30.0), description="yuan per day (assumed range)"),
    CovariateDef("child_pickup_time", "continuous", ("uniform", 0.0, 5.0), description="hours per week (assumed range)"),
    CovariateDef(
        "online_shopping_freq", "ordinal",
        ("categorical", (0.10, 0.20, 0.25, 0.20, 0.12, 0.08, 0.03, 0.02)),
        codes=(0, 1, 2, 3, 4, 5, 6, 7), description="orders per week (assumed shares)",
    ),
    CovariateDef(
        "delivery_freq", "ordinal",
        ("categorical", (0.05, 0.15, 0.25, 0.22, 0.15, 0.10, 0.05, 0.03)),
        codes=(0, 1, 2, 3, 4, 5, 6, 7), description="delivery orders per week (assumed shares)",
    ),
    CovariateDef("online_shopping_expense", "continuous", ("uniform", 0.0, 3000.0), description="yuan per month (assumed range)"),
    CovariateDef("delivery_expense", "continuous", ("uniform", 0.0, 1500.0), description="yuan per month (assumed range)"),
    CovariateDef("car_primary", "binary", ("bernoulli", 0.30), description="1 = car is primary transport mode (assumed share)"),
)


@dataclass
class CovariateEncoding:
    """Ordered registry of covariate definitions."""

    defs: dict[str, CovariateDef] = field(
        default_factory=lambda: {d.name: d for d in DEFAULT_COVARIATES}
    )

    def __getitem__(self, name: str) -> CovariateDef:
        try:
            return self.defs[name]
        except KeyError:
            raise InputError(f"unknown covariate {name!r}; known: {list(self.defs)}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.defs

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.defs)

    def table(self) -> list[dict]:
        """Publishable encoding table for reports."""
        return [
            {
                "name": d.name,
                "kind": d.kind,
                "reference": d.reference,
                "categories": list(d.categories) or None,
                "codes": list(d.codes) or None,
                "description": d.description,
            }
            for d in self.defs.values()
        ]

    def sample_row(self, rng: np.random.Generator, names: tuple[str, ...] | None = None) -> dict[str, float]:
        return {n: self[n].sample(rng) for n in (names or self.names)}


DEFAULT_ENCODING = CovariateEncoding()
