"""Synthetic respondents and brute-force likelihood oracles.

Simulators draw Gumbel utility noise by inverse CDF (-ln(-ln u)) so datasets
are bit-reproducible across platforms. One global seed expands into
per-respondent substreams via numpy SeedSequence spawn keys; within a
respondent, covariates, coefficient draws, task selection, and noise each use
their own child stream, so e.g. switching a model family that consumes extra
coefficient randomness leaves the other streams untouched.

The brute-force log-likelihoods recompute each family's objective by the most
literal route available (per-observation softmax; dense-grid integration for
the families whose engines use quadrature or simulation draws) and refuse
datasets above 1,000 observations: they exist to check the engines, not to
scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .access import SbdcDataset, SbdcObservation
from .core import ATTRIBUTES, ChoiceTask, Coefficients, Dataset, Observation
from .covariates import DEFAULT_ENCODING, CovariateEncoding
from .design import Design
from .errors import ConfigError, InputError

BRUTE_FORCE_MAX_OBS = 1000


# ---------------------------------------------------------------------------
# truth specifications


@dataclass(frozen=True)
class ClTruth:
    beta: Coefficients


@dataclass(frozen=True)
class GmnlTruth:
    mean: Coefficients
    sd: dict[str, float]
    tau: float


@dataclass(frozen=True)
class SbdcTruth:
    beta0: float
    beta_c: float
    sigma: float = 0.0
    beta_x: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class LatentClassTruth:
    class_betas: tuple[Coefficients, ...]
    shares: tuple[float, ...]

    def __post_init__(self):
        if len(self.class_betas) != len(self.shares):
            raise InputError("class_betas and shares must align")
        if abs(sum(self.shares) - 1.0) > 1e-9:
            raise InputError("shares must sum to 1")


@dataclass(frozen=True)
class TruthSpec:
    """A model family plus its true parameters, covariate plan, and seed."""

    family: str  # "clogit" | "gmnl" | "sbdc" | "latent_class"
    params: ClTruth | GmnlTruth | SbdcTruth | LatentClassTruth
    seed: int
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        expected = {
            "clogit": ClTruth,
            "gmnl": GmnlTruth,
            "sbdc": SbdcTruth,
            "latent_class": LatentClassTruth,
        }
        if self.family not in expected:
            raise ConfigError(f"unknown family {self.family!r}")
        if not isinstance(self.params, expected[self.family]):
            raise ConfigError(
                f"family {self.family!r} expects {expected[self.family].__name__}"
            )


def truth_to_dict(truth: TruthSpec) -> dict:
    p = truth.params
    if isinstance(p, ClTruth):
        payload = {"beta": dict(p.beta)}
    elif isinstance(p, GmnlTruth):
        payload = {"mean": dict(p.mean), "sd": dict(p.sd), "tau": p.tau}
    elif isinstance(p, SbdcTruth):
        payload = {"beta0": p.beta0, "beta_c": p.beta_c, "sigma": p.sigma, "beta_x": dict(p.beta_x)}
    else:
        payload = {"class_betas": [dict(b) for b in p.class_betas], "shares": list(p.shares)}
    return {
        "family": truth.family,
        "params": payload,
        "seed": truth.seed,
        "covariate_names": list(truth.covariate_names),
    }


def truth_from_dict(d: dict) -> TruthSpec:
    family, payload = d["family"], d["params"]
    params: ClTruth | GmnlTruth | SbdcTruth | LatentClassTruth
    if family == "clogit":
        params = ClTruth(beta=dict(payload["beta"]))
    elif family == "gmnl":
        params = GmnlTruth(mean=dict(payload["mean"]), sd=dict(payload["sd"]), tau=float(payload["tau"]))
    elif family == "sbdc":
        params = SbdcTruth(
            beta0=float(payload["beta0"]), beta_c=float(payload["beta_c"]),
            sigma=float(payload.get("sigma", 0.0)), beta_x=dict(payload.get("beta_x", {})),
        )
    elif family == "latent_class":
        params = LatentClassTruth(
            class_betas=tuple(dict(b) for b in payload["class_betas"]),
            shares=tuple(payload["shares"]),
        )
    else:
        raise ConfigError(f"unknown family {family!r}")
    return TruthSpec(
        family=family, params=params, seed=int(d["seed"]),
        covariate_names=tuple(d.get("covariate_names", ())),
    )


def save_truth(truth: TruthSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(truth_to_dict(truth), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_truth(path) -> TruthSpec:
    with open(path, encoding="utf-8") as fh:
        return truth_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# seeding and primitive draws


def respondent_streams(seed: int, index: int, n: int = 4) -> list[np.random.Generator]:
    """Independent child generators for respondent ``index`` under one seed.

    Child 0 covariates, 1 coefficient/class draws, 2 task selection, 3 noise.
    """
    base = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return [np.random.default_rng(s) for s in base.spawn(n)]


def gumbel(rng: np.random.Generator, size) -> np.ndarray:
    u = np.clip(rng.random(size), 1e-300, 1.0 - 1e-16)
    return -np.log(-np.log(u))


def _beta_for_respondent(truth: TruthSpec, rng: np.random.Generator) -> np.ndarray:
    if isinstance(truth.params, ClTruth):
        return np.array([truth.params.beta[a] for a in ATTRIBUTES])
    if isinstance(truth.params, GmnlTruth):
        p = truth.params
        mean = np.array([p.mean[a] for a in ATTRIBUTES])
        draw = rng.standard_normal(3)
        eta = np.array([p.sd.get("wait", 0.0) * draw[0], 0.0, p.sd.get("unrel", 0.0) * draw[1]])
        scale = math.exp(-0.5 * p.tau**2 + p.tau * draw[2])
        return scale * (mean + eta)
    if isinstance(truth.params, LatentClassTruth):
        p = truth.params
        k = int(rng.choice(len(p.shares), p=np.asarray(p.shares)))
        return np.array([p.class_betas[k][a] for a in ATTRIBUTES])
    raise ConfigError(f"family {truth.family!r} cannot generate choice data")


def simulate_sce(
    design: Design,
    truth: TruthSpec,
    n_respondents: int,
    tasks_per_scenario: int = 4,
    seed: int | None = None,
    scenarios: tuple[str, ...] = ("work", "home"),
    encoding: CovariateEncoding = DEFAULT_ENCODING,
) -> Dataset:
    """Simulate stated-choice responses on a design under known parameters.

    Each respondent draws ``tasks_per_scenario`` distinct tasks per scenario,
    receives independent standard-Gumbel noise per alternative, and picks the
    argmax utility. Deterministic given the seed.
    """
    if not design.tasks:
        raise InputError("empty design")
    if tasks_per_scenario > len(design.tasks):
        raise InputError(
            f"tasks_per_scenario={tasks_per_scenario} exceeds design size {len(design.tasks)}"
        )
    seed = truth.seed if seed is None else seed
    observations: list[Observation] = []
    covariates: dict[str, dict[str, float]] = {}
    for i in range(n_respondents):
        rng_cov, rng_coef, rng_tasks, rng_noise = respondent_streams(seed, i)
        rid = f"r{i:05d}"
        covariates[rid] = (
            encoding.sample_row(rng_cov, truth.covariate_names) if truth.covariate_names else {}
        )
        beta = _beta_for_respondent(truth, rng_coef)
        for scenario in scenarios:
            picks = rng_tasks.choice(len(design.tasks), size=tasks_per_scenario, replace=False)
            for t_idx in picks:
                base = design.tasks[int(t_idx)]
                task = ChoiceTask(task_id=base.task_id, alternatives=base.alternatives, scenario=scenario)
                u = task.attribute_matrix() @ beta + gumbel(rng_noise, task.n_alternatives)
                observations.append(Observation(rid, task, int(np.argmax(u))))
    return Dataset(observations, covariates)


def simulate_sbdc(
    truth: TruthSpec,
    compensation_levels=(100.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0),
    draws_per_respondent: int = 4,
    n_respondents: int = 525,
    seed: int | None = None,
    encoding: CovariateEncoding = DEFAULT_ENCODING,
) -> SbdcDataset:
    """Simulate accept/decline responses to randomly assigned compensations."""
    if not isinstance(truth.params, SbdcTruth):
        raise ConfigError("simulate_sbdc needs an sbdc truth")
    levels = np.asarray(compensation_levels, dtype=float)
    if levels.size == 0:
        raise InputError("compensation_levels is empty")
    if draws_per_respondent > levels.size:
        raise InputError("draws_per_respondent exceeds the number of levels")
    seed = truth.seed if seed is None else seed
    p = truth.params
    observations: list[SbdcObservation] = []
    covariates: dict[str, dict[str, float]] = {}
    for i in range(n_respondents):
        rng_cov, rng_coef, rng_levels, rng_accept = respondent_streams(seed, i)
        rid = f"r{i:05d}"
        row = encoding.sample_row(rng_cov, truth.covariate_names) if truth.covariate_names else {}
        covariates[rid] = row
        alpha = p.beta0 + p.sigma * rng_coef.standard_normal()
        shift = sum(p.beta_x[name] * row[name] for name in p.beta_x)
        picks = rng_levels.choice(levels.size, size=draws_per_respondent, replace=False)
        for j in picks:
            c = float(levels[int(j)])
            eta = alpha + p.beta_c * math.log(c) + shift
            prob = 1.0 / (1.0 + math.exp(-eta)) if eta >= 0 else math.exp(eta) / (1.0 + math.exp(eta))
            observations.append(SbdcObservation(rid, c, bool(rng_accept.random() < prob)))
    return SbdcDataset(observations, covariates)


# ---------------------------------------------------------------------------
# brute-force likelihood oracles


def _guard_size(n_obs: int) -> None:
    if n_obs > BRUTE_FORCE_MAX_OBS:
        raise InputError(
            f"brute-force oracle refuses {n_obs} observations (max {BRUTE_FORCE_MAX_OBS}); "
            "it is intentionally slow"
        )


def _clogit_obs_loglik(obs: Observation, beta: Coefficients) -> float:
    utilities = [
        sum(beta[a] * getattr(alt, a) for a in ATTRIBUTES) for alt in obs.task.alternatives
    ]
    m = max(utilities)
    denom = sum(math.exp(u - m) for u in utilities)
    return utilities[obs.chosen_index] - m - math.log(denom)


def brute_force_loglik(data, params, family: str) -> float:
    """Reference log-likelihood by literal evaluation.

    families:
      "clogit"        per-observation softmax over a Coefficients map
      "latent_class"  respondent mixture over a LatentClassTruth
      "sbdc"          trapezoid integration of the random intercept
                      (10,000 grid points over ±8 sd) for an SbdcTruth
      "gmnl"          tensor trapezoid grid over the three standard-normal
                      shocks (22 points per dimension) for a GmnlTruth
    """
    if family == "clogit":
        _guard_size(len(data.observations))
        return sum(_clogit_obs_loglik(o, params) for o in data.observations)

    if family == "latent_class":
        _guard_size(len(data.observations))
        truth: LatentClassTruth = params
        total = 0.0
        for rid in data.respondent_ids:
            obs = [o for o in data.observations if o.respondent_id == rid]
            li = 0.0
            for share, beta in zip(truth.shares, truth.class_betas):
                li += share * math.exp(sum(_clogit_obs_loglik(o, beta) for o in obs))
            total += math.log(max(li, 1e-300))
        return total

    if family == "sbdc":
        _guard_size(len(data.observations))
        p: SbdcTruth = params
        grid = np.linspace(-8.0, 8.0, 10_000)
        dz = grid[1] - grid[0]
        log_w = -0.5 * grid**2 - 0.5 * math.log(2 * math.pi) + math.log(dz)
        total = 0.0
        for rid in data.respondent_ids:
            obs = [o for o in data.observations if o.respondent_id == rid]
            row = data.covariates.get(rid, {})
            shift = sum(p.beta_x[name] * row[name] for name in p.beta_x)
            log_f = np.zeros_like(grid)
            for o in obs:
                eta = p.beta0 + p.sigma * grid + p.beta_c * math.log(o.compensation) + shift
                if o.accepted:
                    log_f += -np.logaddexp(0.0, -eta)
                else:
                    log_f += -np.logaddexp(0.0, eta)
            total += float(np.logaddexp.reduce(log_f + log_w))
        return total

    if family == "gmnl":
        _guard_size(len(data.observations))
        t: GmnlTruth = params
        pts = np.linspace(-6.0, 6.0, 22)
        dz = pts[1] - pts[0]
        log_w1 = -0.5 * pts**2 - 0.5 * math.log(2 * math.pi) + math.log(dz)
        ZW, ZU, ZS = np.meshgrid(pts, pts, pts, indexing="ij")
        log_w = (log_w1[:, None, None] + log_w1[None, :, None] + log_w1[None, None, :]).ravel()
        mean = np.array([t.mean[a] for a in ATTRIBUTES])
        eta = np.stack(
            [t.sd.get("wait", 0.0) * ZW.ravel(), np.zeros(ZW.size), t.sd.get("unrel", 0.0) * ZU.ravel()],
            axis=1,
        )
        scale = np.exp(-0.5 * t.tau**2 + t.tau * ZS.ravel())
        betas = scale[:, None] * (mean[None, :] + eta)  # (G, 3)
        total = 0.0
        for rid in data.respondent_ids:
            obs = [o for o in data.observations if o.respondent_id == rid]
            log_f = np.zeros(betas.shape[0])
            for o in obs:
                U = o.task.attribute_matrix() @ betas.T  # (J, G)
                U -= U.max(axis=0, keepdims=True)
                log_f += U[o.chosen_index] - np.log(np.exp(U).sum(axis=0))
            total += float(np.logaddexp.reduce(log_f + log_w))
        return total

    raise ConfigError(f"unknown family {family!r}")
