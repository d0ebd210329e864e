"""Command-line interface for the stated-preference toolkit."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import report as rpt
from .access import SbdcConfig, fit_sbdc, wtac_individual, wtac_median
from .attributes import DrawConfig, FitConfig, GmnlConfig, GmnlParameters, compute_wtp, fit_clogit, fit_gmnl
from .design import audit_design, enumerate_pairs, filter_dominated, load_design, save_design, select_design, table_grid_spec
from .errors import ChoicevalError
from .ingest import IngestConfig, ingest_groups, ingest_sbdc, ingest_sce, write_sbdc_csv, write_sce_csv
from .latent import LcConfig, fit_latent_class
from .pipeline import load_config, merge_config, resolve_data_dir, run_pipeline
from .synth import load_truth, simulate_sbdc, simulate_sce
from .welfare import default_groups, spt_table, welfare_change

_data_dir_option = click.option(
    "--data-dir", envvar="CHOICEVAL_DATA_DIR", default="out", show_default=True,
    help="Directory for inputs/outputs (env CHOICEVAL_DATA_DIR).",
)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
def main():
    """Design, collect, estimate, and value stated-preference choice data."""


# -- design ------------------------------------------------------------------


@main.group()
def design():
    """Generate and audit efficient designs."""


@design.command("generate")
@click.option("--n-tasks", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--n-restarts", default=50, show_default=True)
@click.option("--balance-weight", default=0.0, show_default=True)
@click.option("--out", default="design.json", show_default=True)
def design_generate(n_tasks, seed, n_restarts, balance_weight, out):
    spec = table_grid_spec()
    candidates = filter_dominated(enumerate_pairs(spec))
    d = select_design(candidates, n_tasks, seed=seed, spec=spec,
                      n_restarts=n_restarts, balance_weight=balance_weight)
    save_design(d, out)
    click.echo(f"wrote {out}: {len(d.tasks)} tasks, d_error {d.d_error:.6g}")


@design.command("audit")
@click.argument("path")
def design_audit(path):
    d = load_design(path)
    click.echo(json.dumps(audit_design(d), indent=2, sort_keys=True))


# -- simulate ----------------------------------------------------------------


@main.group()
def simulate():
    """Generate synthetic response files from a truth spec."""


@simulate.command("sce")
@click.option("--design", "design_path", required=True)
@click.option("--truth", "truth_path", required=True, help="truth.json with an sce-capable family")
@click.option("--n", default=525, show_default=True)
@click.option("--tasks-per-scenario", default=4, show_default=True)
@click.option("--scenarios", default="work,home", show_default=True)
@click.option("--seed", default=None, type=int, help="Override the truth spec's seed.")
@click.option("--out", default="responses_sce.csv", show_default=True)
def simulate_sce_cmd(design_path, truth_path, n, tasks_per_scenario, scenarios, seed, out):
    d = load_design(design_path)
    truth = load_truth(truth_path)
    data = simulate_sce(d, truth, n, tasks_per_scenario, seed=seed,
                        scenarios=tuple(scenarios.split(",")))
    write_sce_csv(data, out)
    click.echo(f"wrote {out}: {len(data.observations)} observations")


@simulate.command("sbdc")
@click.option("--truth", "truth_path", required=True)
@click.option("--n", default=525, show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--out", default="responses_sbdc.csv", show_default=True)
def simulate_sbdc_cmd(truth_path, n, seed, out):
    truth = load_truth(truth_path)
    data = simulate_sbdc(truth, n_respondents=n, seed=seed)
    write_sbdc_csv(data, out)
    click.echo(f"wrote {out}: {len(data.observations)} observations")


# -- fit ---------------------------------------------------------------------


@main.group()
def fit():
    """Estimate a model from a response file."""


@fit.command("sbdc")
@click.option("--data", "data_path", required=True)
@click.option("--spec", type=click.Choice(["base", "extended"]), default="base", show_default=True)
@click.option("--nodes", default=32, show_default=True)
@click.option("--strict-quality", is_flag=True)
@click.option("--out", default="fit_sbdc.json", show_default=True)
def fit_sbdc_cmd(data_path, spec, nodes, strict_quality, out):
    data, _ = ingest_sbdc(data_path, IngestConfig(strict=strict_quality))
    f = fit_sbdc(data, spec=spec, config=SbdcConfig(quadrature_nodes=nodes))
    _write_json(Path(out), rpt.sbdc_fit_to_dict(f))
    if f.beta_c > 0:
        click.echo(f"wrote {out}: llf {f.llf:.4f}, wtac {wtac_median(f):.2f}")
    else:
        click.echo(
            f"wrote {out}: llf {f.llf:.4f}; wtac undefined "
            f"(slope on log-compensation is {f.beta_c:.4f})"
        )


@fit.command("clogit")
@click.option("--data", "data_path", required=True)
@click.option("--scenario", default="work", show_default=True)
@click.option("--strict-quality", is_flag=True)
@click.option("--out", default=None)
def fit_clogit_cmd(data_path, scenario, strict_quality, out):
    data, _ = ingest_sce(data_path, IngestConfig(strict=strict_quality))
    f = fit_clogit(data.subset_scenario(scenario), FitConfig())
    out = out or f"fit_clogit_{scenario}.json"
    _write_json(Path(out), rpt.fit_to_dict(f))
    click.echo(f"wrote {out}: {f.coefficients}")


@fit.command("gmnl")
@click.option("--data", "data_path", required=True)
@click.option("--scenario", default="work", show_default=True)
@click.option("--n-draws", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True, help="Draw-scrambling seed.")
@click.option("--strict-quality", is_flag=True)
@click.option("--out", default=None)
def fit_gmnl_cmd(data_path, scenario, n_draws, seed, strict_quality, out):
    data, _ = ingest_sce(data_path, IngestConfig(strict=strict_quality))
    subset = data.subset_scenario(scenario)
    cl = fit_clogit(subset, FitConfig())
    params0 = GmnlParameters(
        mean=dict(cl.coefficients), sd={"wait": 0.05, "unrel": 0.3}, tau=0.5,
        draw_config=DrawConfig(n_draws=n_draws, seed=seed),
    )
    f = fit_gmnl(subset, params0, GmnlConfig())
    out = out or f"fit_gmnl_{scenario}.json"
    _write_json(Path(out), rpt.fit_to_dict(f))
    click.echo(f"wrote {out}: llf {f.llf:.4f}")


@fit.command("lclogit")
@click.option("--data", "data_path", required=True)
@click.option("--scenario", default="work", show_default=True)
@click.option("--k", default=2, show_default=True)
@click.option("--membership-covariates", default="", help="Comma-separated covariate names.")
@click.option("--n-starts", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--strict-quality", is_flag=True)
@click.option("--out", default="latent_class_fit.json", show_default=True)
def fit_lclogit_cmd(data_path, scenario, k, membership_covariates, n_starts, seed, strict_quality, out):
    data, _ = ingest_sce(data_path, IngestConfig(strict=strict_quality))
    subset = data.subset_scenario(scenario)
    covs = tuple(c for c in membership_covariates.split(",") if c)
    f = fit_latent_class(subset, k, covs, LcConfig(n_starts=n_starts, seed=seed))
    _write_json(Path(out), rpt.latent_fit_to_dict(f))
    click.echo(f"wrote {out}: llf {f.llf:.4f}, shares {[round(s, 3) for s in f.shares]}")


# -- valuation ---------------------------------------------------------------


@main.command()
@click.option("--fit", "fit_path", required=True, help="fit_clogit_*.json or fit_gmnl_*.json")
@click.option("--out", default="wtp_report.json", show_default=True)
def wtp(fit_path, out):
    """Willingness to pay from a fitted attribute model."""
    with open(fit_path, encoding="utf-8") as fh:
        payload = json.load(fh)
    import numpy as np

    from .core import FitResult

    f = FitResult(
        model=payload["model"], coefficients=payload["coefficients"], se=payload["se"],
        cov=np.array(payload["cov"]), param_names=tuple(payload["param_names"]),
        llf=payload["llf"], n_obs=payload["n_obs"], n_respondents=payload["n_respondents"],
        converged=payload["converged"], n_iter=payload["n_iter"], extra=payload.get("extra", {}),
    )
    report = compute_wtp(f)
    _write_json(Path(out), rpt.wtp_to_dict(report))
    click.echo(f"wrote {out}: waiting {report.value('wait', 'yuan_per_hour'):.2f} yuan/hour")


@main.command()
@click.option("--data", "data_path", required=True)
@click.option("--spec", type=click.Choice(["base", "extended"]), default="base", show_default=True)
@click.option("--individual", is_flag=True, help="Also derive per-respondent thresholds (extended spec).")
@click.option("--out", default="wtac_report.json", show_default=True)
def wtac(data_path, spec, individual, out):
    """Fit the access model and report willingness-to-accept compensation."""
    data, _ = ingest_sbdc(data_path)
    f = fit_sbdc(data, spec=spec)
    payload = rpt.sbdc_fit_to_dict(f)
    payload["wtac_median"] = wtac_median(f)
    if individual and spec == "extended":
        ind = wtac_individual(f, data)
        payload["individual"] = {"median": ind["median"], "mean": ind["mean"],
                                 "quantiles": {str(k): v for k, v in ind["quantiles"].items()}}
    _write_json(Path(out), payload)
    click.echo(f"wrote {out}: median wtac {payload['wtac_median']:.2f}")


@main.command()
@click.option("--svtt", required=True, type=float, help="Time value in yuan/hour.")
@click.option("--groups", "groups_path", default=None, help="groups.csv; defaults to the sample's brackets.")
@click.option("--delta-t", default=1.0, show_default=True, help="Time saved per person, hours.")
@click.option("--income-weighted", is_flag=True, help="Set social weights to 1/income.")
@click.option("--out", default="welfare_report.json", show_default=True)
def welfare(svtt, groups_path, delta_t, income_weighted, out):
    """Social price of time and aggregate welfare change."""
    groups = ingest_groups(groups_path) if groups_path else default_groups(income_weighted)
    spt = spt_table(svtt, groups)
    report = welfare_change(spt, groups, delta_t, svtt=svtt)
    _write_json(Path(out), rpt.welfare_to_dict(report, groups))
    click.echo(f"wrote {out}: total {report.total_per_hour:.2f} yuan/hour")


# -- orchestration -----------------------------------------------------------


@main.command()
@click.option("--config", "config_path", required=True)
@_data_dir_option
def run(config_path, data_dir):
    """Run the configured pipeline stages in dependency order."""
    config = load_config(config_path)
    from .pipeline import effective_config_dump

    click.echo(effective_config_dump(config), nl=False)
    result = run_pipeline(config, data_dir)
    if result.error is not None:
        click.echo(f"ERROR in stage {result.error.stage!r}: {result.error.cause}", err=True)
    else:
        for name in sorted(result.artifacts):
            click.echo(f"wrote {result.artifacts[name]}")
    sys.exit(result.exit_code)


@main.command()
@click.option("--config", "config_path", required=True)
@_data_dir_option
def report(config_path, data_dir):
    """Run a pipeline config with the report stage forced on."""
    config = load_config(config_path)
    if "report" not in config["stages"]:
        config["stages"] = list(config["stages"]) + ["report"]
    result = run_pipeline(config, data_dir)
    if result.error is not None:
        click.echo(f"ERROR in stage {result.error.stage!r}: {result.error.cause}", err=True)
    sys.exit(result.exit_code)


@main.command()
@click.option("--design", "design_path", required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--journal", default=None, help="Append-only JSONL persistence path.")
def serve(design_path, seed, host, port, journal):
    """Serve the response-collection API for a design."""
    import uvicorn

    from .service import create_app

    app = create_app(load_design(design_path), seed=seed, journal_path=journal)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
