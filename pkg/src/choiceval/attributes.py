"""Attribute preference estimation and willingness-to-pay.

Two estimators share the conditional-logit kernel from ``core``:

* ``fit_clogit``: plain conditional logit, a concave MLE with analytic
  gradient and Hessian. Cluster-robust (by respondent) standard errors are
  the default report; classical ones ride along.
* ``fit_gmnl``: scale-heterogeneity mixed logit. Coefficients on waiting time
  and unreliability get normal heterogeneity, cost stays fixed, and the whole
  vector is multiplied by a respondent-level log-normal scale
  exp(-tau^2/2 + tau*z) whose mean is one. The likelihood is simulated with
  scrambled quasi-random draws (bases 2/3/5, one dimension per random
  attribute plus one for scale), averaging the panel product of task
  probabilities over draws. Deterministic for a fixed draw seed.

WTP is the ratio of an attribute coefficient to the cost coefficient, with
delta-method standard errors from the fit covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .core import ATTRIBUTES, Coefficients, Dataset, FitResult, dataset_arrays
from .errors import ConfigError, DomainError, IdentificationError, NumericError, SeparationError
from .optimize import bhhh_covariance, cluster_sandwich, invert_information, maximize, require_converged

RANDOM_ATTRIBUTES = ("wait", "unrel")  # cost carries no independent heterogeneity


@dataclass(frozen=True)
class DrawConfig:
    n_draws: int = 500
    sequence: str = "scrambled_halton"
    skip: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_draws < 100:
            raise ConfigError(f"n_draws must be at least 100, got {self.n_draws}")
        if self.sequence != "scrambled_halton":
            raise ConfigError(f"unknown draw sequence {self.sequence!r}")


@dataclass(frozen=True)
class GmnlParameters:
    """Scale-heterogeneity logit parameters (also used as starting values)."""

    mean: Coefficients
    sd: dict[str, float]
    tau: float
    draw_config: DrawConfig = DrawConfig()

    def __post_init__(self):
        missing = [a for a in ATTRIBUTES if a not in self.mean]
        if missing:
            raise ConfigError(f"mean is missing attributes {missing}")
        extra = [a for a in self.sd if a not in RANDOM_ATTRIBUTES]
        if extra:
            raise ConfigError(f"sd allowed only on {RANDOM_ATTRIBUTES}, got {extra}")


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-8
    max_iter: int = 500


@dataclass(frozen=True)
class GmnlConfig:
    tol: float = 1e-4
    max_iter: int = 500
    fix_tau: float | None = None
    fix_sd: float | None = None  # fixes both sd entries at this value


def _scenario_tag(data: Dataset) -> str:
    tags = {o.task.scenario for o in data.observations}
    return tags.pop() if len(tags) == 1 else "pooled"


def _check_identification(X: np.ndarray) -> None:
    flat = [a for k, a in enumerate(ATTRIBUTES) if np.all(X[:, :, k] == X[:, :1, k])]
    if flat:
        raise IdentificationError(
            f"attributes constant within every task: {flat}; coefficients not identified"
        )


def _respondent_blocks(resp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable sort order grouping observations by respondent, plus block starts."""
    order = np.argsort(resp, kind="stable")
    starts = np.flatnonzero(np.r_[True, np.diff(resp[order]) != 0])
    return order, starts


def clogit_loglik(data: Dataset, beta: Coefficients) -> float:
    """Exact conditional-logit log-likelihood (softmax over alternatives)."""
    from .core import log_likelihood

    return log_likelihood(data, beta)[0]


def fit_clogit(data: Dataset, config: FitConfig = FitConfig()) -> FitResult:
    """Maximum likelihood conditional logit.

    The likelihood is concave, so any start reaches the global optimum.
    Raises SeparationError when the fitted model predicts every choice
    perfectly (no interior maximum exists).
    """
    X, chosen, resp = dataset_arrays(data)
    _check_identification(X)
    order, starts = _respondent_blocks(resp)
    n_obs = len(chosen)

    def obj(theta):
        U = X @ theta
        shifted = U - U.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(shifted).sum(axis=1))
        log_p = shifted[np.arange(n_obs), chosen] - logsum
        P = np.exp(shifted - logsum[:, None])
        g = X[np.arange(n_obs), chosen, :] - np.einsum("oj,ojk->ok", P, X)
        return float(log_p.sum()), g.sum(axis=0)

    res = maximize(obj, np.zeros(len(ATTRIBUTES)), tol=config.tol, max_iter=config.max_iter)
    require_converged(res, "fit_clogit", hint="possible separation")

    U = X @ res.x
    P = np.exp(U - U.max(axis=1, keepdims=True))
    P /= P.sum(axis=1, keepdims=True)
    p_chosen = P[np.arange(n_obs), chosen]
    if p_chosen.min() > 1.0 - 1e-9:
        raise SeparationError(
            "choices are perfectly predicted; coefficients diverge", culprit="all attributes"
        )

    xbar = np.einsum("oj,ojk->ok", P, X)
    centered = X - xbar[:, None, :]
    info = np.einsum("oj,ojk,ojl->kl", P, centered, centered)
    cov_classical = invert_information(info, "fit_clogit")

    g_obs = X[np.arange(n_obs), chosen, :] - xbar
    g_resp = np.add.reduceat(g_obs[order], starts, axis=0)
    cov_robust = cluster_sandwich(cov_classical, g_resp)

    se_r = np.sqrt(np.diag(cov_robust))
    se_c = np.sqrt(np.diag(cov_classical))
    return FitResult(
        model="clogit",
        coefficients=dict(zip(ATTRIBUTES, res.x.tolist())),
        se=dict(zip(ATTRIBUTES, se_r.tolist())),
        cov=cov_robust,
        param_names=ATTRIBUTES,
        llf=res.llf,
        n_obs=n_obs,
        n_respondents=int(resp.max()) + 1,
        converged=res.converged,
        n_iter=res.n_iter,
        classical_se=dict(zip(ATTRIBUTES, se_c.tolist())),
        extra={"scenario": _scenario_tag(data)},
    )


def make_normal_draws(n_respondents: int, n_draws: int, cfg: DrawConfig) -> np.ndarray:
    """(n_respondents, n_draws, 3) standard-normal quasi-random draws.

    Dimensions are (wait shock, unreliability shock, scale shock). Respondent
    r owns the contiguous block of rows [r*n_draws, (r+1)*n_draws).
    """
    sampler = qmc.Halton(d=3, scramble=True, seed=cfg.seed)
    sampler.fast_forward(cfg.skip)
    u = sampler.random(n_respondents * n_draws)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    return ndtri(u).reshape(n_respondents, n_draws, 3)


class _GmnlEngine:
    """Caches data/draw structures for repeated simulated-likelihood evaluations."""

    def __init__(self, data: Dataset, draw_config: DrawConfig):
        X, chosen, resp = dataset_arrays(data)
        _check_identification(X)
        order, starts = _respondent_blocks(resp)
        self.X = X[order]
        self.chosen = chosen[order]
        self.resp = resp[order]
        self.starts = starts
        self.n_resp = int(resp.max()) + 1
        self.n_obs = len(chosen)
        self.draws = make_normal_draws(self.n_resp, draw_config.n_draws, draw_config)
        self.n_draws = draw_config.n_draws
        # two-alternative tasks reduce to a binary logit on attribute
        # differences, which halves the simulation arrays
        self.pairwise = X.shape[1] == 2
        if self.pairwise:
            other = 1 - self.chosen
            self.xdiff = self.X[np.arange(self.n_obs), self.chosen, :] - self.X[
                np.arange(self.n_obs), other, :
            ]

    def coefficient_draws(self, mean: np.ndarray, sd: np.ndarray, tau: float):
        """Per-respondent, per-draw coefficient vectors and the scale factors."""
        eta = np.zeros((self.n_resp, self.n_draws, 3))
        eta[:, :, 0] = sd[0] * self.draws[:, :, 0]  # wait
        eta[:, :, 2] = sd[1] * self.draws[:, :, 1]  # unrel
        zeta = self.draws[:, :, 2]
        scale = np.exp(-0.5 * tau**2 + tau * zeta)
        beta = scale[:, :, None] * (mean[None, None, :] + eta)
        return beta, scale, zeta

    def loglik_grad(self, mean: np.ndarray, sd: np.ndarray, tau: float):
        """Simulated log-likelihood, scores per respondent, in the full
        6-parameter order (mean x3, sd_wait, sd_unrel, tau)."""
        beta, scale, zeta = self.coefficient_draws(mean, sd, tau)
        beta_obs = beta[self.resp]  # (n_obs, D, 3)
        if self.pairwise:
            eta = np.einsum("ok,odk->od", self.xdiff, beta_obs)
            log_p = -np.logaddexp(0.0, -eta)
        else:
            U = np.einsum("ojk,odk->odj", self.X, beta_obs)
            U -= U.max(axis=2, keepdims=True)
            expU = np.exp(U)
            denom = expU.sum(axis=2)
            log_p = U[np.arange(self.n_obs), :, self.chosen] - np.log(denom)
        log_f = np.add.reduceat(log_p, self.starts, axis=0)  # (R, D)
        if not np.all(np.isfinite(log_f)):
            r, d = np.argwhere(~np.isfinite(log_f))[0]
            raise NumericError(f"non-finite simulated likelihood at respondent {r}, draw {d}")
        log_mean = np.logaddexp.reduce(log_f, axis=1) - np.log(self.n_draws)
        llf = float(log_mean.sum())

        q = np.exp(log_f - np.logaddexp.reduce(log_f, axis=1)[:, None])  # (R, D)
        if self.pairwise:
            s_obs = np.exp(log_p - eta)[:, :, None] * self.xdiff[:, None, :]
        else:
            P = expU / denom[:, :, None]
            x_chosen = self.X[np.arange(self.n_obs), self.chosen, :]
            s_obs = x_chosen[:, None, :] - np.einsum("odj,ojk->odk", P, self.X)
        s = np.add.reduceat(s_obs, self.starts, axis=0)  # (R, D, 3) score wrt beta^{rd}

        qs = q[:, :, None] * s
        d_mean = np.einsum("rdk,rd->rk", qs, scale)
        d_sd_wait = np.einsum("rd,rd,rd->r", q * s[:, :, 0], scale, self.draws[:, :, 0])
        d_sd_unrel = np.einsum("rd,rd,rd->r", q * s[:, :, 2], scale, self.draws[:, :, 1])
        d_tau = np.einsum("rdk,rdk,rd->r", qs, beta, zeta - tau)
        scores = np.column_stack([d_mean, d_sd_wait, d_sd_unrel, d_tau])
        return llf, scores


def simulated_loglik(data: Dataset, params: GmnlParameters) -> float:
    """Simulated log-likelihood of the scale-heterogeneity model at a parameter point."""
    engine = _GmnlEngine(data, params.draw_config)
    mean = np.array([params.mean[a] for a in ATTRIBUTES])
    sd = np.array([params.sd.get("wait", 0.0), params.sd.get("unrel", 0.0)])
    llf, _ = engine.loglik_grad(mean, sd, params.tau)
    return llf


def fit_gmnl(data: Dataset, params0: GmnlParameters, config: GmnlConfig = GmnlConfig()) -> FitResult:
    """Simulated maximum likelihood for the scale-heterogeneity logit.

    ``params0`` supplies starting values and the draw plan. ``config`` may pin
    tau and/or the heterogeneity standard deviations (used to verify that the
    model collapses to the conditional logit). SD entries and tau are
    estimated unconstrained; magnitudes are reported.
    """
    engine = _GmnlEngine(data, params0.draw_config)
    full_names = ATTRIBUTES + ("sd_wait", "sd_unrel", "tau")

    fixed: dict[int, float] = {}
    if config.fix_sd is not None:
        fixed[3] = config.fix_sd
        fixed[4] = config.fix_sd
    if config.fix_tau is not None:
        fixed[5] = config.fix_tau
    free = [i for i in range(6) if i not in fixed]

    theta_full0 = np.array(
        [params0.mean[a] for a in ATTRIBUTES]
        + [params0.sd.get("wait", 0.0), params0.sd.get("unrel", 0.0), params0.tau]
    )

    def expand(theta_free: np.ndarray) -> np.ndarray:
        full = theta_full0.copy()
        full[free] = theta_free
        for i, v in fixed.items():
            full[i] = v
        return full

    def obj(theta_free):
        full = expand(theta_free)
        llf, scores = engine.loglik_grad(full[:3], full[3:5], full[5])
        return llf, scores.sum(axis=0)[free]

    res = maximize(obj, theta_full0[free], tol=config.tol, max_iter=config.max_iter)
    require_converged(res, "fit_gmnl")
    full = expand(res.x)
    _, scores = engine.loglik_grad(full[:3], full[3:5], full[5])
    cov = bhhh_covariance(scores[:, free], "fit_gmnl")
    se_free = np.sqrt(np.diag(cov))
    se = {full_names[i]: float(se_free[j]) for j, i in enumerate(free)}

    coefficients = dict(zip(ATTRIBUTES, full[:3].tolist()))
    coefficients["sd_wait"] = abs(float(full[3]))
    coefficients["sd_unrel"] = abs(float(full[4]))
    coefficients["tau"] = abs(float(full[5]))
    return FitResult(
        model="gmnl",
        coefficients=coefficients,
        se=se,
        cov=cov,
        param_names=tuple(full_names[i] for i in free),
        llf=res.llf,
        n_obs=engine.n_obs,
        n_respondents=engine.n_resp,
        converged=res.converged,
        n_iter=res.n_iter,
        extra={
            "scenario": _scenario_tag(data),
            "n_draws": params0.draw_config.n_draws,
            "draw_seed": params0.draw_config.seed,
        },
    )


@dataclass(frozen=True)
class WtpEntry:
    attribute: str
    value: float
    unit: str
    se: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class WtpReport:
    model: str
    scenario: str
    entries: tuple[WtpEntry, ...]

    def value(self, attribute: str, unit: str) -> float:
        for e in self.entries:
            if e.attribute == attribute and e.unit == unit:
                return e.value
        raise KeyError((attribute, unit))


def _ratio_se(cov: np.ndarray, names: tuple[str, ...], attr: str, a: float, c: float) -> float:
    if attr not in names or "cost" not in names:
        return float("nan")
    ia, ic = names.index(attr), names.index("cost")
    grad = np.zeros(len(names))
    grad[ia] = 1.0 / c
    grad[ic] = -a / c**2
    var = float(grad @ cov @ grad)
    return float(np.sqrt(max(var, 0.0)))


def compute_wtp(fit: FitResult) -> WtpReport:
    """Willingness to pay per attribute unit: coefficient divided by cost coefficient.

    Waiting time is additionally reported per hour. Unchanged under any
    positive rescaling of the coefficient vector.
    """
    beta = fit.coefficients
    c = beta.get("cost")
    if c is None:
        raise ConfigError("fit lacks a cost coefficient")
    if c >= 0:
        raise DomainError(f"cost coefficient must be negative for WTP, got {c}")
    entries = []
    for attr, per_unit, factor in (
        ("wait", "yuan_per_minute", 1.0),
        ("wait", "yuan_per_hour", 60.0),
        ("unrel", "yuan_per_minute", 1.0),
    ):
        a = beta[attr]
        value = factor * a / c
        se = factor * _ratio_se(fit.cov, fit.param_names, attr, a, c)
        half = 1.959963984540054 * se
        entries.append(WtpEntry(attr, value, per_unit, se, value - half, value + half))
    return WtpReport(
        model=fit.model,
        scenario=str(fit.extra.get("scenario", "pooled")),
        entries=tuple(entries),
    )
