"""Shared maximum-likelihood machinery: quasi-Newton driver and covariance helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize as sopt

from .errors import NonConvergenceError, RankError


@dataclass
class MaximizeResult:
    x: np.ndarray
    llf: float
    grad: np.ndarray
    converged: bool
    n_iter: int


def maximize(
    objective_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> MaximizeResult:
    """Maximize a log-likelihood with BFGS and analytic gradients.

    Convergence means the gradient infinity-norm dropped below ``tol``;
    scipy's own success flag is ignored in favor of that check (line-search
    precision loss right at the optimum still counts as converged).
    """

    def negated(x: np.ndarray) -> tuple[float, np.ndarray]:
        f, g = objective_and_grad(x)
        return -f, -np.asarray(g, dtype=float)

    # BFGS can stop on line-search precision loss a hair above gtol; a restart
    # resets its Hessian model and usually grinds out a little more.
    x = np.asarray(x0, dtype=float)
    n_iter = 0
    for _ in range(2):
        res = sopt.minimize(
            negated,
            x,
            jac=True,
            method="BFGS",
            options={"gtol": tol, "norm": np.inf, "maxiter": max_iter},
        )
        x = np.asarray(res.x, dtype=float)
        n_iter += int(res.nit)
        llf, grad = objective_and_grad(x)
        if (np.max(np.abs(grad)) < tol and np.isfinite(llf)) or n_iter >= max_iter:
            break
        if res.nit == 0:
            break
    if np.max(np.abs(grad)) >= tol and np.isfinite(llf):
        # Newton steps on a finite-difference Hessian of the analytic gradient
        # finish the job; BFGS line searches cannot resolve objective changes
        # this close to the optimum.
        x, llf, grad, polish_iters = _newton_polish(objective_and_grad, x, tol)
        n_iter += polish_iters
    converged = bool(np.max(np.abs(grad)) < tol) and bool(np.isfinite(llf))
    return MaximizeResult(
        x=x,
        llf=float(llf),
        grad=np.asarray(grad, dtype=float),
        converged=converged,
        n_iter=n_iter,
    )


def _fd_hessian(objective_and_grad, x: np.ndarray) -> np.ndarray:
    n = len(x)
    H = np.empty((n, n))
    for i in range(n):
        h = 1e-6 * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        H[:, i] = (objective_and_grad(xp)[1] - objective_and_grad(xm)[1]) / (2 * h)
    return 0.5 * (H + H.T)


def _newton_polish(objective_and_grad, x0, tol, max_steps: int = 12):
    x = np.asarray(x0, dtype=float)
    llf, grad = objective_and_grad(x)
    steps = 0
    for _ in range(max_steps):
        gnorm = np.max(np.abs(grad))
        if gnorm < tol or not np.isfinite(gnorm):
            break
        H = _fd_hessian(objective_and_grad, x)
        try:
            delta = np.linalg.solve(-H, grad)
        except np.linalg.LinAlgError:
            break
        improved = False
        t = 1.0
        for _ in range(12):
            x_new = x + t * delta
            llf_new, grad_new = objective_and_grad(x_new)
            if np.isfinite(llf_new) and np.max(np.abs(grad_new)) < gnorm:
                x, llf, grad = x_new, llf_new, grad_new
                improved = True
                break
            t *= 0.5
        steps += 1
        if not improved:
            break
    return x, llf, grad, steps


def require_converged(res: MaximizeResult, what: str, hint: str = "") -> None:
    if not res.converged:
        detail = f" ({hint})" if hint else ""
        raise NonConvergenceError(
            f"{what}: gradient norm {np.max(np.abs(res.grad)):.3g} after "
            f"{res.n_iter} iterations{detail}"
        )


def invert_information(info: np.ndarray, what: str) -> np.ndarray:
    """Invert an information matrix, raising RankError when singular."""
    info = np.asarray(info, dtype=float)
    sign, logdet = np.linalg.slogdet(info)
    if sign <= 0 or not np.isfinite(logdet):
        raise RankError(f"{what}: singular information matrix")
    try:
        return np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise RankError(f"{what}: {exc}") from None


def bhhh_covariance(scores: np.ndarray, what: str, ridge_fallback: bool = False) -> np.ndarray:
    """Covariance from the outer product of per-respondent score vectors.

    With ``ridge_fallback`` a singular score cross-product gets an escalating
    diagonal ridge instead of raising: parameters whose scores vanish (e.g. a
    coefficient diverging against a quasi-separated class) then report huge
    standard errors rather than aborting the fit.
    """
    S = np.asarray(scores, dtype=float)
    info = S.T @ S
    if not ridge_fallback:
        return invert_information(info, what)
    scale = max(float(np.max(np.diag(info))), 1.0)
    for ridge in (0.0, 1e-10, 1e-8, 1e-6):
        try:
            return invert_information(info + ridge * scale * np.eye(len(info)), what)
        except RankError:
            continue
    raise RankError(f"{what}: information matrix singular even after ridging")


def cluster_sandwich(hess_inv: np.ndarray, cluster_scores: np.ndarray) -> np.ndarray:
    """Cluster-robust sandwich covariance with a G/(G-1) correction."""
    S = np.asarray(cluster_scores, dtype=float)
    G = S.shape[0]
    meat = S.T @ S * (G / max(G - 1, 1))
    return hess_inv @ meat @ hess_inv
