"""Latent-class conditional logit with covariate-driven class membership.

The respondent-level likelihood is a finite mixture: membership probabilities
are a multinomial logit on respondent covariates (reference class pinned at
zero), and within a class the respondent's tasks follow a conditional logit
with class-specific attribute coefficients. Estimation runs EM (weighted
conditional logits and a weighted membership logit per M-step) followed by a
direct quasi-Newton polish, taking the best of several random starts seeded
around the pooled conditional-logit solution.

Classes are canonically ordered by descending cost-coefficient magnitude so
label switching cannot make two equivalent fits look different.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ATTRIBUTES, Coefficients, Dataset, dataset_arrays
from .errors import InputError
from .attributes import FitConfig, fit_clogit, _respondent_blocks
from .optimize import bhhh_covariance, maximize, require_converged

DEGENERATE_SHARE = 1e-4
UNIDENTIFIED_MAGNITUDE = 10.0  # membership coefficients beyond this are flagged


@dataclass(frozen=True)
class LcConfig:
    n_starts: int = 20
    em_tol: float = 1e-9
    max_em_iter: int = 500
    seed: int = 0
    polish_tol: float = 1e-6
    polish_max_iter: int = 500


@dataclass(frozen=True)
class LatentClassFit:
    K: int
    class_betas: tuple[Coefficients, ...]
    gamma: tuple[dict[str, float], ...]  # one map per class; reference row all zeros
    shares: tuple[float, ...]
    membership_covariates: tuple[str, ...]
    llf: float
    n_params: int
    aic: float
    bic: float
    se: dict[str, float]
    param_names: tuple[str, ...]
    n_respondents: int
    n_obs: int
    converged: bool
    llf_path: tuple[float, ...]
    degenerate: bool = False
    unidentified: tuple[str, ...] = ()


def information_criteria(llf: float, n_params: int, n_respondents: int) -> tuple[float, float]:
    """(AIC, BIC) with the respondent count as the BIC sample size."""
    if n_respondents < 1:
        raise InputError("n_respondents must be at least 1")
    aic = -2.0 * llf + 2.0 * n_params
    bic = -2.0 * llf + n_params * float(np.log(n_respondents))
    return aic, bic


class _LcEngine:
    def __init__(self, data: Dataset, membership_covariates: tuple[str, ...]):
        X, chosen, resp = dataset_arrays(data)
        order, starts = _respondent_blocks(resp)
        self.X = X[order]
        self.chosen = chosen[order]
        self.starts = starts
        self.n_obs = len(chosen)
        self.n_resp = int(resp.max()) + 1
        ids = data.respondent_ids
        self.Z = np.ones((self.n_resp, 1 + len(membership_covariates)))
        for j, name in enumerate(membership_covariates):
            for i, rid in enumerate(ids):
                row = data.covariates.get(rid, {})
                if name not in row:
                    raise InputError(f"respondent {rid!r}: missing covariate {name!r}")
                self.Z[i, 1 + j] = row[name]

    def class_logprobs(self, B: np.ndarray) -> np.ndarray:
        """(n_resp, K) panel log-probability of each respondent's choices per class."""
        U = np.einsum("ojk,ck->ojc", self.X, B)
        U -= U.max(axis=1, keepdims=True)
        log_p = U[np.arange(self.n_obs), self.chosen, :] - np.log(np.exp(U).sum(axis=1))
        return np.add.reduceat(log_p, self.starts, axis=0)

    def class_scores(self, B: np.ndarray) -> np.ndarray:
        """(n_resp, K, 3) conditional-logit score of each respondent under each class."""
        U = np.einsum("ojk,ck->ojc", self.X, B)
        U -= U.max(axis=1, keepdims=True)
        e = np.exp(U)
        P = e / e.sum(axis=1, keepdims=True)  # (n_obs, J, K)
        xbar = np.einsum("ojc,ojk->ock", P, self.X)
        s_obs = self.X[np.arange(self.n_obs), self.chosen, :][:, None, :] - xbar
        return np.add.reduceat(s_obs, self.starts, axis=0)

    def membership_logprobs(self, G: np.ndarray) -> np.ndarray:
        """(n_resp, K) log prior membership probabilities; class 0 is the reference."""
        eta = np.concatenate([np.zeros((self.n_resp, 1)), self.Z @ G.T], axis=1)
        eta -= eta.max(axis=1, keepdims=True)
        return eta - np.log(np.exp(eta).sum(axis=1, keepdims=True))

    def mixture_llf(self, B: np.ndarray, G: np.ndarray):
        """Log-likelihood, posterior weights, and priors of the mixture."""
        log_joint = self.membership_logprobs(G) + self.class_logprobs(B)
        log_li = np.logaddexp.reduce(log_joint, axis=1)
        W = np.exp(log_joint - log_li[:, None])
        return float(log_li.sum()), W

    def _newton_concave(self, grad_hess, x0, tol=1e-11, max_iter=60):
        x = x0.copy()
        f0, g, H = grad_hess(x)
        best_f, best_x = f0, x.copy()
        for _ in range(max_iter):
            if np.max(np.abs(g)) < tol:
                break
            try:
                step = np.linalg.solve(H + 1e-12 * np.eye(len(x)), -g)
            except np.linalg.LinAlgError:
                step = -g
            t = 1.0
            for _ in range(30):
                f1, g1, H1 = grad_hess(x + t * step)
                if f1 >= f0 - 1e-13:
                    x = x + t * step
                    f0, g, H = f1, g1, H1
                    break
                t *= 0.5
            else:
                break
            if f0 > best_f:
                best_f, best_x = f0, x.copy()
        return best_x

    def mstep_beta(self, w_k: np.ndarray, beta0: np.ndarray) -> np.ndarray:
        """Weighted conditional logit for one class (weights per respondent)."""
        w_obs = np.repeat(w_k, np.diff(np.r_[self.starts, self.n_obs]))

        def grad_hess(b):
            U = self.X @ b
            U -= U.max(axis=1, keepdims=True)
            e = np.exp(U)
            P = e / e.sum(axis=1, keepdims=True)
            log_p = np.log(np.maximum(P[np.arange(self.n_obs), self.chosen], 1e-300))
            f = float(w_obs @ log_p)
            xbar = np.einsum("oj,ojk->ok", P, self.X)
            g = ((self.X[np.arange(self.n_obs), self.chosen, :] - xbar) * w_obs[:, None]).sum(axis=0)
            centered = self.X - xbar[:, None, :]
            H = -np.einsum("o,oj,ojk,ojl->kl", w_obs, P, centered, centered)
            return f, g, H

        return self._newton_concave(grad_hess, beta0)

    def mstep_gamma(self, W: np.ndarray, G0: np.ndarray) -> np.ndarray:
        """Weighted membership logit; parameters for classes 1..K-1."""
        K = W.shape[1]
        p = self.Z.shape[1]

        def grad_hess(gflat):
            G = gflat.reshape(K - 1, p)
            log_pi = self.membership_logprobs(G)
            pi = np.exp(log_pi)
            f = float((W * log_pi).sum())
            diff = W[:, 1:] - pi[:, 1:]  # (n_resp, K-1)
            g = (diff[:, :, None] * self.Z[:, None, :]).reshape(self.n_resp, -1).sum(axis=0)
            H = np.zeros(((K - 1) * p, (K - 1) * p))
            for a in range(1, K):
                for b in range(1, K):
                    w = pi[:, a] * ((a == b) - pi[:, b])
                    block = -(self.Z * w[:, None]).T @ self.Z
                    H[(a - 1) * p:a * p, (b - 1) * p:b * p] = block
            return f, g, H

        return self._newton_concave(grad_hess, G0.ravel()).reshape(K - 1, p)


def _canonicalize(B: np.ndarray, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Order classes by descending |cost| (ties by coefficient tuple); rebase gamma."""
    cost_idx = ATTRIBUTES.index("cost")
    order = sorted(range(B.shape[0]), key=lambda k: (-abs(B[k, cost_idx]), tuple(B[k])))
    B2 = B[order]
    full = np.concatenate([np.zeros((1, G.shape[1])), G], axis=0)[order]
    G2 = full[1:] - full[0]
    return B2, G2


def fit_latent_class(
    data: Dataset,
    K: int,
    membership_covariates: tuple[str, ...] = (),
    config: LcConfig = LcConfig(),
) -> LatentClassFit:
    """Fit a K-class mixture of conditional logits.

    K=1 reduces exactly to the pooled conditional logit. For K>1, EM runs from
    ``n_starts`` seeded initializations (pooled solution plus noise, random
    membership splits), the best run is polished by quasi-Newton on the full
    mixture likelihood, and classes are put in canonical order. A class whose
    average membership falls below 1e-4 marks the fit degenerate.
    """
    if K < 1:
        raise InputError("K must be at least 1")
    if config.n_starts < 1:
        raise InputError("n_starts must be at least 1")
    membership_covariates = tuple(membership_covariates)
    pooled = fit_clogit(data, FitConfig())

    if K == 1:
        llf = pooled.llf
        n_params = len(ATTRIBUTES)
        aic, bic = information_criteria(llf, n_params, pooled.n_respondents)
        return LatentClassFit(
            K=1,
            class_betas=(dict(pooled.coefficients),),
            gamma=({"const": 0.0, **{c: 0.0 for c in membership_covariates}},),
            shares=(1.0,),
            membership_covariates=membership_covariates,
            llf=llf,
            n_params=n_params,
            aic=aic,
            bic=bic,
            se={f"class1_{a}": s for a, s in pooled.se.items()},
            param_names=tuple(f"class1_{a}" for a in ATTRIBUTES),
            n_respondents=pooled.n_respondents,
            n_obs=pooled.n_obs,
            converged=pooled.converged,
            llf_path=(llf,),
        )

    engine = _LcEngine(data, membership_covariates)
    p = engine.Z.shape[1]
    beta_pooled = np.array([pooled.coefficients[a] for a in ATTRIBUTES])
    rng = np.random.default_rng(config.seed)

    best: tuple[float, np.ndarray, np.ndarray, list[float]] | None = None
    for _ in range(config.n_starts):
        B = beta_pooled[None, :] * (1.0 + 0.5 * rng.standard_normal((K, 3)))
        B += 0.1 * np.abs(beta_pooled).mean() * rng.standard_normal((K, 3))
        G = 0.5 * rng.standard_normal((K - 1, p))

        llf, W = engine.mixture_llf(B, G)
        path = [llf]
        for _ in range(config.max_em_iter):
            for k in range(K):
                B[k] = engine.mstep_beta(W[:, k], B[k])
            if K > 1:
                G = engine.mstep_gamma(W, G)
            new_llf, W = engine.mixture_llf(B, G)
            if new_llf < llf - 1e-10:
                raise RuntimeError(
                    f"EM step decreased the log-likelihood: {llf} -> {new_llf}"
                )
            path.append(new_llf)
            done = new_llf - llf < config.em_tol
            llf = new_llf
            if done:
                break
        if best is None or llf > best[0]:
            best = (llf, B.copy(), G.copy(), path)

    assert best is not None
    _, B, G, path = best

    def unpack(theta):
        return theta[: K * 3].reshape(K, 3), theta[K * 3:].reshape(K - 1, p)

    def obj(theta):
        Bt, Gt = unpack(theta)
        llf, W = engine.mixture_llf(Bt, Gt)
        s = engine.class_scores(Bt)  # (n_resp, K, 3)
        g_beta = (W[:, :, None] * s).sum(axis=0).ravel()
        pi = np.exp(engine.membership_logprobs(Gt))
        diff = W[:, 1:] - pi[:, 1:]
        g_gamma = (diff[:, :, None] * engine.Z[:, None, :]).sum(axis=0).ravel()
        return llf, np.r_[g_beta, g_gamma]

    res = maximize(obj, np.r_[B.ravel(), G.ravel()], tol=config.polish_tol, max_iter=config.polish_max_iter)
    require_converged(res, "fit_latent_class", hint="try more starts")
    B, G = unpack(res.x)
    B, G = _canonicalize(B, G)
    llf, W = engine.mixture_llf(B, G)
    path = list(path) + [llf]

    # per-respondent scores at the optimum for BHHH standard errors; a class
    # coefficient diverging against quasi-separated choices zeroes its score
    # column, so ridge instead of failing and flag the parameter below
    s = engine.class_scores(B)
    pi = np.exp(engine.membership_logprobs(G))
    score_beta = (W[:, :, None] * s).reshape(engine.n_resp, -1)
    score_gamma = ((W[:, 1:] - pi[:, 1:])[:, :, None] * engine.Z[:, None, :]).reshape(engine.n_resp, -1)
    scores = np.concatenate([score_beta, score_gamma], axis=1)
    cov = bhhh_covariance(scores, "fit_latent_class", ridge_fallback=True)
    se_vec = np.sqrt(np.abs(np.diag(cov)))

    cov_names = ("const",) + membership_covariates
    param_names = tuple(f"class{k + 1}_{a}" for k in range(K) for a in ATTRIBUTES) + tuple(
        f"member{k + 1}_{c}" for k in range(1, K) for c in cov_names
    )
    se = dict(zip(param_names, se_vec.tolist()))

    shares = tuple(pi.mean(axis=0).tolist())
    degenerate = any(sh < DEGENERATE_SHARE for sh in shares)
    if degenerate:
        warnings.warn(
            f"latent class share collapsed below {DEGENERATE_SHARE}; refit with fewer classes",
            RuntimeWarning,
            stacklevel=2,
        )
    gamma_maps = [{c: 0.0 for c in cov_names}]
    for k in range(1, K):
        gamma_maps.append(dict(zip(cov_names, G[k - 1].tolist())))
    unidentified = tuple(
        f"member{k + 1}_{c}"
        for k in range(1, K)
        for c, v in gamma_maps[k].items()
        if abs(v) > UNIDENTIFIED_MAGNITUDE
    ) + tuple(name for name, s_val in se.items() if s_val > 1e2)

    n_params = K * 3 + (K - 1) * p
    aic, bic = information_criteria(llf, n_params, engine.n_resp)
    return LatentClassFit(
        K=K,
        class_betas=tuple(dict(zip(ATTRIBUTES, B[k].tolist())) for k in range(K)),
        gamma=tuple(gamma_maps),
        shares=shares,
        membership_covariates=membership_covariates,
        llf=llf,
        n_params=n_params,
        aic=aic,
        bic=bic,
        se=se,
        param_names=param_names,
        n_respondents=engine.n_resp,
        n_obs=engine.n_obs,
        converged=res.converged,
        llf_path=tuple(path),
        degenerate=degenerate,
        unidentified=unidentified,
    )


def posterior_class_probs(fit: LatentClassFit, data: Dataset, respondent_id: str) -> np.ndarray:
    """Posterior class membership of one respondent given their observed choices."""
    obs = [o for o in data.observations if o.respondent_id == respondent_id]
    if not obs:
        raise InputError(f"respondent {respondent_id!r} has no observations")
    if fit.K == 1:
        return np.array([1.0])
    row = data.covariates.get(respondent_id, {})
    z = np.ones(1 + len(fit.membership_covariates))
    for j, name in enumerate(fit.membership_covariates):
        if name not in row:
            raise InputError(f"respondent {respondent_id!r}: missing covariate {name!r}")
        z[1 + j] = row[name]
    G = np.array([[fit.gamma[k][c] for c in ("const",) + fit.membership_covariates] for k in range(1, fit.K)])
    eta = np.r_[0.0, G @ z]
    log_prior = eta - np.logaddexp.reduce(eta)

    B = np.array([[fit.class_betas[k][a] for a in ATTRIBUTES] for k in range(fit.K)])
    log_like = np.zeros(fit.K)
    for o in obs:
        U = o.task.attribute_matrix() @ B.T  # (J, K)
        U -= U.max(axis=0, keepdims=True)
        log_like += U[o.chosen_index] - np.log(np.exp(U).sum(axis=0))
    log_post = log_prior + log_like
    log_post -= np.logaddexp.reduce(log_post)
    return np.exp(log_post)
