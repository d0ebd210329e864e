"""Valuation of service access: random-intercept binary logit on
accept-compensation-or-keep-service responses, and the willingness-to-accept
closed forms derived from it.

The model is logit(p) = a_i + b_c * log(C) [+ b_x . x_i] with a_i normal
around a mean intercept. The normal intercept is integrated out by
Gauss-Hermite quadrature (32 nodes by default), the marginal likelihood is
maximized by quasi-Newton with analytic gradients, and the intercept standard
deviation is estimated unconstrained (only its magnitude is identified).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .errors import ConfigError, DomainError, InputError, SeparationError
from .optimize import bhhh_covariance, maximize, require_converged

# compensation grid used in replication mode (yuan per month)
SBDC_COMPENSATION_LEVELS = (100.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0)


@dataclass(frozen=True)
class SbdcObservation:
    """One accept/decline answer to a stated compensation amount."""

    respondent_id: str
    compensation: float
    accepted: bool

    def __post_init__(self):
        if not self.compensation > 0:
            raise InputError(
                f"respondent {self.respondent_id}: compensation must be positive"
            )


@dataclass
class SbdcDataset:
    observations: list[SbdcObservation]
    covariates: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        for obs in self.observations:
            if obs.respondent_id not in self.covariates:
                self.covariates[obs.respondent_id] = {}

    @property
    def respondent_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for obs in self.observations:
            seen.setdefault(obs.respondent_id, None)
        return list(seen)


@dataclass(frozen=True)
class SbdcFit:
    """Fitted access-valuation model."""

    spec: str  # "base" or "extended"
    beta0_mean: float
    beta_c: float
    beta_x: dict[str, float]
    sigma_intercept: float
    se: dict[str, float]
    cov: np.ndarray
    param_names: tuple[str, ...]
    llf: float
    n_obs: int
    n_respondents: int
    converged: bool
    n_iter: int


@dataclass(frozen=True)
class SbdcConfig:
    quadrature_nodes: int = 32
    tol: float = 1e-8
    max_iter: int = 500
    fix_sigma: float | None = None  # pin the intercept SD (0.0 gives a plain logit)


def _stacked_arrays(data: SbdcDataset, covariate_names: tuple[str, ...]):
    """Sort observations by respondent and stack estimation arrays."""
    if not data.observations:
        raise InputError("empty dataset")
    ids = data.respondent_ids
    id_index = {r: i for i, r in enumerate(ids)}
    order = np.argsort([id_index[o.respondent_id] for o in data.observations], kind="stable")
    obs = [data.observations[i] for i in order]
    log_c = np.log([o.compensation for o in obs])
    y = np.array([float(o.accepted) for o in obs])
    resp = np.array([id_index[o.respondent_id] for o in obs], dtype=np.intp)
    starts = np.flatnonzero(np.r_[True, np.diff(resp) != 0])
    X = np.zeros((len(ids), len(covariate_names)))
    for j, name in enumerate(covariate_names):
        for r, rid in enumerate(ids):
            row = data.covariates.get(rid, {})
            if name not in row:
                raise InputError(f"respondent {rid!r}: missing covariate {name!r}")
            X[r, j] = row[name]
    return ids, log_c, y, resp, starts, X


def _check_separation(log_c: np.ndarray, y: np.ndarray, X: np.ndarray, resp: np.ndarray, names: tuple[str, ...]) -> None:
    if y.min() == y.max():
        which = "accepted" if y[0] else "rejected"
        raise SeparationError(f"all responses identical (all {which}); intercept unbounded", culprit="intercept")
    columns = [("compensation", log_c)] + [(n, X[resp, j]) for j, n in enumerate(names)]
    for name, col in columns:
        acc, rej = col[y == 1], col[y == 0]
        if acc.min() > rej.max() or rej.min() > acc.max():
            raise SeparationError(f"complete separation on {name!r}", culprit=name)


def marginal_loglik(
    data: SbdcDataset,
    beta0: float,
    beta_c: float,
    beta_x: dict[str, float] | None = None,
    sigma: float = 0.0,
    n_nodes: int = 32,
) -> float:
    """Marginal log-likelihood at a parameter point (quadrature over the intercept)."""
    names = tuple(beta_x or {})
    _, log_c, y, resp, starts, X = _stacked_arrays(data, names)
    theta = np.r_[beta0, beta_c, [dict(beta_x or {})[n] for n in names], sigma]
    llf, _, _ = _loglik_grad(theta, log_c, y, resp, starts, X, n_nodes)
    return llf


def _loglik_grad(theta, log_c, y, resp, starts, X, n_nodes):
    """Value, gradient, and per-respondent score matrix of the marginal log-likelihood."""
    n_resp, p = X.shape
    beta0, beta_c, sigma = theta[0], theta[1], theta[-1]
    beta_x = theta[2:-1]
    nodes, weights = hermgauss(n_nodes)
    log_w = np.log(weights) - 0.5 * math.log(math.pi)
    alpha = beta0 + math.sqrt(2.0) * sigma * nodes  # (K,)

    lin = beta_c * log_c + (X[resp] @ beta_x if p else 0.0)  # (n_obs,)
    eta = lin[:, None] + alpha[None, :]  # (n_obs, K)
    # log p(y | eta), stable in both tails
    log_p = np.where(y[:, None] == 1.0, -np.logaddexp(0.0, -eta), -np.logaddexp(0.0, eta))
    log_f = np.add.reduceat(log_p, starts, axis=0)  # (n_resp, K)

    log_terms = log_f + log_w[None, :]
    log_li = np.logaddexp.reduce(log_terms, axis=1)  # (n_resp,)
    llf = float(np.sum(log_li))

    q = np.exp(log_terms - log_li[:, None])  # posterior node weights, rows sum to 1
    resid = y[:, None] - _sigmoid(eta)  # (n_obs, K)
    resid_sum = np.add.reduceat(resid, starts, axis=0)  # (n_resp, K)
    qr = q * resid_sum

    s_beta0 = qr.sum(axis=1)
    s_beta_c = (q * np.add.reduceat(resid * log_c[:, None], starts, axis=0)).sum(axis=1)
    s_sigma = math.sqrt(2.0) * (qr @ nodes)
    scores = np.column_stack([s_beta0, s_beta_c] + [s_beta0 * X[:, j] for j in range(p)] + [s_sigma])
    # covariates are respondent-constant, so their score is x_ij times the intercept score
    grad = scores.sum(axis=0)
    return llf, grad, scores


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _plain_logit_start(log_c, y, X, resp):
    """A few Newton steps of the no-random-intercept logit for a warm start."""
    n, p = len(y), X.shape[1]
    Z = np.column_stack([np.ones(n), log_c, X[resp]])
    b = np.zeros(1 + 1 + p)
    for _ in range(25):
        eta = Z @ b
        mu = _sigmoid(eta)
        g = Z.T @ (y - mu)
        W = mu * (1 - mu)
        H = (Z * W[:, None]).T @ Z + 1e-10 * np.eye(Z.shape[1])
        step = np.linalg.solve(H, g)
        b = b + step
        if np.max(np.abs(g)) < 1e-6:
            break
    return b


def fit_sbdc(data: SbdcDataset, spec: str = "base", config: SbdcConfig = SbdcConfig(),
             covariate_names: tuple[str, ...] | None = None) -> SbdcFit:
    """Fit the access-valuation model.

    ``spec="base"`` uses only log-compensation and the random intercept;
    ``spec="extended"`` appends respondent covariates (all covariates present
    on the first respondent unless ``covariate_names`` narrows the set).
    """
    if spec not in ("base", "extended"):
        raise ConfigError(f"unknown spec {spec!r}")
    if spec == "base":
        names: tuple[str, ...] = ()
    else:
        names = covariate_names or tuple(data.covariates[data.respondent_ids[0]])
        names = tuple(n for n in names)
        if not names:
            raise ConfigError("extended spec requires covariates on the dataset")
    ids, log_c, y, resp, starts, X = _stacked_arrays(data, names)
    if len(np.unique(log_c)) < 2:
        raise InputError("need at least 2 distinct compensation levels")
    _check_separation(log_c, y, X, resp, names)

    warm = _plain_logit_start(log_c, y, X, resp)
    fixed_sigma = config.fix_sigma

    if fixed_sigma is None:
        x0 = np.r_[warm, 0.5]  # sigma start

        def obj(theta):
            llf, grad, _ = _loglik_grad(theta, log_c, y, resp, starts, X, config.quadrature_nodes)
            return llf, grad

    else:
        x0 = warm

        def obj(theta):
            full = np.r_[theta, fixed_sigma]
            llf, grad, _ = _loglik_grad(full, log_c, y, resp, starts, X, config.quadrature_nodes)
            return llf, grad[:-1]

    res = maximize(obj, x0, tol=config.tol, max_iter=config.max_iter)
    require_converged(res, "fit_sbdc", hint="possible quasi-separation")
    theta_full = res.x if fixed_sigma is None else np.r_[res.x, fixed_sigma]
    _, _, scores = _loglik_grad(theta_full, log_c, y, resp, starts, X, config.quadrature_nodes)
    if fixed_sigma is not None:
        scores = scores[:, :-1]
    cov = bhhh_covariance(scores, "fit_sbdc")
    se = np.sqrt(np.diag(cov))

    param_names = ("beta0", "log_compensation") + names
    if fixed_sigma is None:
        param_names = param_names + ("sigma_intercept",)
    beta_x = dict(zip(names, theta_full[2:-1].tolist()))
    return SbdcFit(
        spec=spec,
        beta0_mean=float(theta_full[0]),
        beta_c=float(theta_full[1]),
        beta_x=beta_x,
        sigma_intercept=abs(float(theta_full[-1])),
        se=dict(zip(param_names, se.tolist())),
        cov=cov,
        param_names=param_names,
        llf=res.llf,
        n_obs=len(y),
        n_respondents=len(ids),
        converged=res.converged,
        n_iter=res.n_iter,
    )


def acceptance_probability(fit: SbdcFit, compensation: float, covariates: dict[str, float] | None = None) -> float:
    """Acceptance probability at the mean intercept for a compensation amount."""
    if compensation <= 0:
        raise InputError("compensation must be positive")
    eta = fit.beta0_mean + fit.beta_c * math.log(compensation)
    for name, b in fit.beta_x.items():
        if covariates is None or name not in covariates:
            raise InputError(f"missing covariate {name!r}")
        eta += b * covariates[name]
    return float(_sigmoid(np.array([eta]))[0])


def wtac_median(fit: SbdcFit) -> float:
    """Compensation at which acceptance probability is one half: exp(-b0/bc)."""
    if fit.beta_c <= 0:
        raise DomainError(
            f"indifference compensation undefined: slope on log-compensation is {fit.beta_c}"
        )
    return math.exp(-fit.beta0_mean / fit.beta_c)


def wtac_individual(fit: SbdcFit, data: SbdcDataset) -> dict:
    """Per-respondent indifference compensation and summary statistics.

    C_i = exp(-(b0 + b_x . x_i) / b_c): a covariate with a positive acceptance
    coefficient lowers the respondent's indifference point.
    """
    if fit.spec != "extended" or not fit.beta_x:
        raise ConfigError("individual thresholds require an extended fit")
    if fit.beta_c <= 0:
        raise DomainError("slope on log-compensation must be positive")
    values: dict[str, float] = {}
    for rid in data.respondent_ids:
        row = data.covariates.get(rid, {})
        z = 0.0
        for name, b in fit.beta_x.items():
            if name not in row:
                raise InputError(f"respondent {rid!r}: missing covariate {name!r}")
            z += b * row[name]
        values[rid] = math.exp(-(fit.beta0_mean + z) / fit.beta_c)
    arr = np.array(list(values.values()))
    quantiles = {q: float(np.quantile(arr, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)}
    return {
        "per_respondent": values,
        "median": float(np.median(arr)),
        "mean": float(arr.mean()),
        "quantiles": quantiles,
    }
