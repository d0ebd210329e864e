"""Report rendering: JSON payloads and markdown tables for every pipeline stage.

Each table cites the hash of the generating configuration so a report can be
regenerated bit-for-bit from its config.
"""

from __future__ import annotations

import hashlib
import json
from typing import Iterable

import numpy as np

from .access import SbdcFit
from .attributes import WtpReport
from .core import ATTRIBUTES, FitResult
from .covariates import CovariateEncoding
from .latent import LatentClassFit
from .welfare import IncomeGroup, WelfareReport

ATTRIBUTE_LABELS = {"wait": "Waiting time", "cost": "Cost", "unrel": "Time unreliability"}


def config_hash(config: dict) -> str:
    """Stable short hash of a configuration mapping."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _fmt(x, nd=4) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{nd}f}"
    return str(x)


def _md_table(headers: list[str], rows: Iterable[Iterable]) -> str:
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(c) for c in row) + " |")
    return "\n".join(lines)


def _caption(title: str, cfg_hash: str | None) -> str:
    suffix = f" (config {cfg_hash})" if cfg_hash else ""
    return f"### {title}{suffix}\n"


# ---------------------------------------------------------------------------
# JSON payloads


def fit_to_dict(fit: FitResult) -> dict:
    return {
        "model": fit.model,
        "coefficients": dict(fit.coefficients),
        "se": dict(fit.se),
        "classical_se": dict(fit.classical_se) if fit.classical_se else None,
        "cov": np.asarray(fit.cov).tolist(),
        "param_names": list(fit.param_names),
        "llf": fit.llf,
        "n_obs": fit.n_obs,
        "n_respondents": fit.n_respondents,
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "extra": {k: v for k, v in fit.extra.items()},
    }


def sbdc_fit_to_dict(fit: SbdcFit) -> dict:
    return {
        "spec": fit.spec,
        "beta0_mean": fit.beta0_mean,
        "beta_c": fit.beta_c,
        "beta_x": dict(fit.beta_x),
        "sigma_intercept": fit.sigma_intercept,
        "se": dict(fit.se),
        "param_names": list(fit.param_names),
        "llf": fit.llf,
        "n_obs": fit.n_obs,
        "n_respondents": fit.n_respondents,
        "converged": fit.converged,
    }


def wtp_to_dict(report: WtpReport) -> dict:
    return {
        "model": report.model,
        "scenario": report.scenario,
        "entries": [
            {
                "attribute": e.attribute,
                "unit": e.unit,
                "value": e.value,
                "se": e.se,
                "ci_low": e.ci_low,
                "ci_high": e.ci_high,
            }
            for e in report.entries
        ],
    }


def latent_fit_to_dict(fit: LatentClassFit) -> dict:
    return {
        "K": fit.K,
        "class_betas": [dict(b) for b in fit.class_betas],
        "gamma": [dict(g) for g in fit.gamma],
        "shares": list(fit.shares),
        "membership_covariates": list(fit.membership_covariates),
        "llf": fit.llf,
        "n_params": fit.n_params,
        "aic": fit.aic,
        "bic": fit.bic,
        "se": dict(fit.se),
        "n_respondents": fit.n_respondents,
        "n_obs": fit.n_obs,
        "converged": fit.converged,
        "degenerate": fit.degenerate,
        "unidentified": list(fit.unidentified),
    }


def welfare_to_dict(report: WelfareReport, groups: list[IncomeGroup]) -> dict:
    return {
        "svtt_yuan_per_hour": report.svtt,
        "reference_income": report.reference_income,
        "delta_t_hours": report.delta_t_hours,
        "groups": [
            {
                "bracket": g.bracket,
                "income": g.income,
                "size": g.size,
                "omega": g.omega,
                "spt": report.group_spt[g.bracket],
                "delta_w_per_hour": report.group_delta_w[g.bracket],
            }
            for g in groups
        ],
        "total_per_hour": report.total_per_hour,
        "total_per_minute": report.total_per_minute,
    }


# ---------------------------------------------------------------------------
# markdown tables


def access_markdown(fit: SbdcFit, wtac: float, individual: dict | None = None, cfg_hash: str | None = None) -> str:
    rows = [("Compensation (log)", fit.beta_c, fit.se.get("log_compensation"))]
    rows += [(name, value, fit.se.get(name)) for name, value in fit.beta_x.items()]
    rows.append(("Constant", fit.beta0_mean, fit.se.get("beta0")))
    rows.append(("Intercept SD", fit.sigma_intercept, fit.se.get("sigma_intercept")))
    md = _caption(f"Access valuation, {fit.spec} model", cfg_hash)
    md += _md_table(["Variable", "Coefficient", "Std. Error"], rows)
    md += f"\n\nMedian indifference compensation: {wtac:.2f} yuan/month"
    md += f" (log-likelihood {fit.llf:.4f}, n={fit.n_respondents} respondents)."
    if individual is not None:
        qs = ", ".join(f"q{int(q * 100)}={v:.1f}" for q, v in individual["quantiles"].items())
        md += (
            f"\nIndividual thresholds: median {individual['median']:.2f}, "
            f"mean {individual['mean']:.2f} ({qs})."
        )
    return md + "\n"


def attribute_fits_markdown(fits: dict[tuple[str, str], FitResult], cfg_hash: str | None = None) -> str:
    """One block per scenario with conditional-logit and mixed-logit rows."""
    parts = [_caption("Service attribute coefficients", cfg_hash)]
    rows = []
    for (model, scenario), fit in sorted(fits.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        label = {"clogit": "Conditional logit", "gmnl": "Scaled mixed logit"}.get(model, model)
        for attr in ATTRIBUTES:
            rows.append((scenario, label, ATTRIBUTE_LABELS[attr], fit.coefficients[attr], fit.se.get(attr)))
        if model == "gmnl":
            for name, lab in (("sd_wait", "SD waiting time"), ("sd_unrel", "SD unreliability"), ("tau", "Scale spread")):
                rows.append((scenario, label, lab, fit.coefficients.get(name), fit.se.get(name)))
    parts.append(_md_table(["Scenario", "Model", "Variable", "Coefficient", "Std. Error"], rows))
    return "\n".join(parts) + "\n"


def wtp_markdown(reports: list[WtpReport], cfg_hash: str | None = None) -> str:
    rows = []
    for rep in reports:
        label = {"clogit": "Conditional logit", "gmnl": "Scaled mixed logit"}.get(rep.model, rep.model)
        for e in rep.entries:
            if e.attribute == "wait" and e.unit == "yuan_per_minute":
                continue  # the per-hour row carries the headline figure
            name = "Waiting time (yuan/hour)" if e.attribute == "wait" else "Unreliability (yuan/minute)"
            rows.append((name, label, rep.scenario, e.value, e.se))
    md = _caption("Willingness to pay", cfg_hash)
    return md + _md_table(["Attribute", "Model", "Scenario", "WTP", "Std. Error"], rows) + "\n"


def latent_stats_markdown(stats: list[dict], cfg_hash: str | None = None) -> str:
    rows = [(s["K"], s["llf"], s["n_params"], s["bic"], s["aic"]) for s in stats]
    md = _caption("Class-count fit statistics", cfg_hash)
    return md + _md_table(["Classes", "LLF", "Nparam", "BIC", "AIC"], rows) + "\n"


def latent_class_markdown(fit: LatentClassFit, cfg_hash: str | None = None) -> str:
    rows = []
    for k, betas in enumerate(fit.class_betas):
        for attr in ATTRIBUTES:
            rows.append((f"Class {k + 1} choice", ATTRIBUTE_LABELS[attr], betas[attr], fit.se.get(f"class{k + 1}_{attr}")))
    for k in range(1, fit.K):
        for name, value in fit.gamma[k].items():
            flag = " (unidentified)" if f"member{k + 1}_{name}" in fit.unidentified else ""
            rows.append((f"Class {k + 1} membership", name + flag, value, fit.se.get(f"member{k + 1}_{name}")))
    md = _caption(f"Latent classes (K={fit.K})", cfg_hash)
    md += _md_table(["Block", "Variable", "Coefficient", "Std. Error"], rows)
    shares = ", ".join(f"class {k + 1}: {s:.3f}" for k, s in enumerate(fit.shares))
    return md + f"\n\nAverage class shares: {shares}.\n"


def spt_markdown(spt: dict[str, float], groups: list[IncomeGroup], cfg_hash: str | None = None) -> str:
    rows = [(g.bracket, g.income, spt[g.bracket]) for g in groups]
    md = _caption("Social price of time by income group", cfg_hash)
    return md + _md_table(["Income bracket", "Income value (yuan)", "SPT (yuan/hour)"], rows) + "\n"


def welfare_markdown(report: WelfareReport, groups: list[IncomeGroup], cfg_hash: str | None = None) -> str:
    rows = [
        (g.bracket, g.size, g.income, report.group_delta_w[g.bracket]) for g in groups
    ]
    rows.append(("Total", sum(g.size for g in groups), "", report.total_per_hour))
    md = _caption("Welfare change by income group", cfg_hash)
    md += _md_table(["Income bracket", "Sample size", "Income value (yuan)", "Welfare change (yuan/hour)"], rows)
    return md + (
        f"\n\nTotal: {report.total_per_hour:.2f} yuan/hour "
        f"({report.total_per_minute:.2f} yuan/minute) at delta_t = {report.delta_t_hours} h.\n"
    )


def encoding_markdown(encoding: CovariateEncoding, cfg_hash: str | None = None) -> str:
    rows = [
        (d["name"], d["kind"], d["reference"] or "", d["description"])
        for d in encoding.table()
    ]
    md = _caption("Covariate encoding", cfg_hash)
    return md + _md_table(["Covariate", "Kind", "Reference level", "Coding"], rows) + "\n"
