"""Declarative pipeline: run design, simulation, estimation, valuation, and
report stages from one YAML config.

Stages run in dependency order. A failing stage keeps whatever outputs it had
already produced under a ``_partial`` suffix and aborts the run with the stage
name attached; exit code 0 means every requested stage converged.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import report as rpt
from .access import SbdcConfig, fit_sbdc, wtac_individual, wtac_median
from .attributes import (
    DrawConfig,
    FitConfig,
    GmnlConfig,
    GmnlParameters,
    compute_wtp,
    fit_clogit,
    fit_gmnl,
)
from .covariates import DEFAULT_ENCODING
from .design import audit_design, enumerate_pairs, filter_dominated, load_design, save_design, select_design, table_grid_spec
from .errors import ChoicevalError, InputError
from .ingest import IngestConfig, ingest_groups, ingest_sbdc, ingest_sce, write_sbdc_csv, write_sce_csv
from .latent import LcConfig, fit_latent_class, posterior_class_probs
from .synth import save_truth, simulate_sbdc, simulate_sce, truth_from_dict
from .welfare import default_groups, spt_table, welfare_change

STAGE_ORDER = ("design", "simulate", "fit", "wtp", "wtac", "welfare", "report")

DEFAULT_CONFIG = {
    "seed": 0,
    "data_dir": "out",
    "stages": list(STAGE_ORDER),
    "design": {"n_tasks": 16, "n_restarts": 50, "balance_weight": 0.0, "prior": {}},
    "simulate": {
        "n_respondents": 525,
        "tasks_per_scenario": 4,
        "scenarios": ["work", "home"],
        "sce_truth": None,
        "sbdc_truth": None,
    },
    "fit": {
        "models": ["sbdc", "clogit"],
        "scenarios": ["work"],
        "sce_path": None,
        "sbdc_path": None,
        "sbdc_spec": "base",
        "strict_quality": False,
        "gmnl": {"n_draws": 500, "seed": 0, "sd0": {"wait": 0.05, "unrel": 0.3}, "tau0": 0.5},
        "lclogit": {"k_values": [2], "selected_k": 2, "membership_covariates": [], "n_starts": 20},
    },
    "wtac": {"individual": False},
    "welfare": {"svtt": None, "delta_t_hours": 1.0, "groups_path": None, "income_weighted": False},
}


class StageError(ChoicevalError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    exit_code: int
    artifacts: dict[str, Path] = field(default_factory=dict)
    error: StageError | None = None
    config_hash: str = ""


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    return merge_config(raw)


def merge_config(raw: dict) -> dict:
    def merge(base, override):
        out = dict(base)
        for k, v in (override or {}).items():
            if isinstance(v, dict) and isinstance(out.get(k), dict):
                out[k] = merge(out[k], v)
            else:
                out[k] = v
        return out

    return merge(DEFAULT_CONFIG, raw)


def effective_config_dump(config: dict) -> str:
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=False)


def resolve_data_dir(config: dict, override: str | None = None) -> Path:
    path = override or os.environ.get("CHOICEVAL_DATA_DIR") or config.get("data_dir", "out")
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


class _StageSink:
    """Collects a stage's outputs so failures can be kept as *_partial files."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.data_dir / name
        self.written.append(p)
        return p

    def mark_partial(self) -> None:
        for p in self.written:
            if p.exists():
                partial = p.with_name(p.stem + "_partial" + p.suffix)
                p.replace(partial)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_pipeline(config: dict, data_dir: str | None = None) -> PipelineResult:
    config = merge_config(config)
    out_dir = resolve_data_dir(config, data_dir)
    cfg_hash = rpt.config_hash(config)
    result = PipelineResult(exit_code=0, config_hash=cfg_hash)
    stages = [s for s in STAGE_ORDER if s in (config.get("stages") or [])]
    state: dict = {"markdown": [], "cfg_hash": cfg_hash}

    for stage in stages:
        sink = _StageSink(out_dir)
        try:
            _STAGES[stage](config, state, sink)
        except Exception as exc:  # keep partial outputs, surface the stage name
            sink.mark_partial()
            err = StageError(getattr(exc, "stage", stage), exc if not isinstance(exc, StageError) else exc.cause)
            result.exit_code = 1
            result.error = err
            return result
        for p in sink.written:
            result.artifacts[p.name] = p
    return result


def _ingest_step(fn, path, *args):
    """File-reading sub-step; failures are attributed to the ingest stage."""
    try:
        return fn(path, *args)
    except (InputError, OSError) as exc:
        err = StageError("ingest", exc)
        raise err from exc


def _stage_design(config, state, sink: _StageSink):
    cfg = config["design"]
    spec = table_grid_spec()
    candidates = filter_dominated(enumerate_pairs(spec))
    design = select_design(
        candidates,
        n_tasks=int(cfg["n_tasks"]),
        prior=cfg.get("prior") or {},
        seed=int(config["seed"]),
        spec=spec,
        n_restarts=int(cfg["n_restarts"]),
        balance_weight=float(cfg["balance_weight"]),
    )
    save_design(design, sink.path("design.json"))
    _write_json(sink.path("design_audit.json"), audit_design(design))
    state["design"] = design


def _load_or_build_design(config, state, sink):
    if "design" in state:
        return state["design"]
    path = Path(sink.data_dir) / "design.json"
    if path.exists():
        state["design"] = load_design(path)
    else:
        _stage_design(config, state, sink)
    return state["design"]


def _stage_simulate(config, state, sink: _StageSink):
    cfg = config["simulate"]
    design = _load_or_build_design(config, state, sink)
    if cfg.get("sce_truth"):
        truth = truth_from_dict(cfg["sce_truth"])
        data = simulate_sce(
            design,
            truth,
            n_respondents=int(cfg["n_respondents"]),
            tasks_per_scenario=int(cfg["tasks_per_scenario"]),
            scenarios=tuple(cfg["scenarios"]),
        )
        write_sce_csv(data, sink.path("responses_sce.csv"))
        save_truth(truth, sink.path("truth_sce.json"))
    if cfg.get("sbdc_truth"):
        truth = truth_from_dict(cfg["sbdc_truth"])
        data = simulate_sbdc(truth, n_respondents=int(cfg["n_respondents"]))
        write_sbdc_csv(data, sink.path("responses_sbdc.csv"))
        save_truth(truth, sink.path("truth_sbdc.json"))


def _stage_fit(config, state, sink: _StageSink):
    cfg = config["fit"]
    models = list(cfg["models"])
    ingest_cfg = IngestConfig(strict=bool(cfg["strict_quality"]))
    fits = state.setdefault("fits", {})

    if "sbdc" in models:
        path = cfg.get("sbdc_path") or sink.data_dir / "responses_sbdc.csv"
        data, quality = _ingest_step(ingest_sbdc, path, ingest_cfg)
        state["sbdc_data"] = data
        fit = fit_sbdc(data, spec=cfg["sbdc_spec"], config=SbdcConfig())
        state["sbdc_fit"] = fit
        payload = rpt.sbdc_fit_to_dict(fit)
        payload["quality"] = {
            "n_rows": quality.n_rows,
            "flagged_fast": quality.flagged_fast,
            "excluded": quality.excluded,
        }
        _write_json(sink.path("fit_sbdc.json"), payload)

    needs_sce = any(m in models for m in ("clogit", "gmnl", "lclogit"))
    if needs_sce:
        path = cfg.get("sce_path") or sink.data_dir / "responses_sce.csv"
        sce_data, sce_quality = _ingest_step(ingest_sce, path, ingest_cfg)
        state["sce_data"] = sce_data

    for scenario in cfg["scenarios"]:
        if not needs_sce:
            break
        subset = sce_data.subset_scenario(scenario)
        if "clogit" in models:
            fit = fit_clogit(subset, FitConfig())
            fits[("clogit", scenario)] = fit
            _write_json(sink.path(f"fit_clogit_{scenario}.json"), rpt.fit_to_dict(fit))
        if "gmnl" in models:
            g = cfg["gmnl"]
            start_mean = fits.get(("clogit", scenario))
            mean0 = dict(start_mean.coefficients) if start_mean else {"wait": -0.01, "cost": -0.01, "unrel": -0.05}
            params0 = GmnlParameters(
                mean=mean0,
                sd=dict(g["sd0"]),
                tau=float(g["tau0"]),
                draw_config=DrawConfig(n_draws=int(g["n_draws"]), seed=int(g["seed"])),
            )
            fit = fit_gmnl(subset, params0, GmnlConfig())
            fits[("gmnl", scenario)] = fit
            _write_json(sink.path(f"fit_gmnl_{scenario}.json"), rpt.fit_to_dict(fit))

    if "lclogit" in models:
        lc_cfg = cfg["lclogit"]
        scenario = cfg["scenarios"][0]
        subset = sce_data.subset_scenario(scenario) if cfg["scenarios"] else sce_data
        stats = []
        for k in lc_cfg["k_values"]:
            fit_k = fit_latent_class(subset, int(k), (), LcConfig(n_starts=int(lc_cfg["n_starts"]), seed=int(config["seed"])))
            stats.append({"K": fit_k.K, "llf": fit_k.llf, "n_params": fit_k.n_params, "aic": fit_k.aic, "bic": fit_k.bic})
        selected = fit_latent_class(
            subset,
            int(lc_cfg["selected_k"]),
            tuple(lc_cfg["membership_covariates"]),
            LcConfig(n_starts=int(lc_cfg["n_starts"]), seed=int(config["seed"])),
        )
        state["lc_stats"] = stats
        state["lc_fit"] = selected
        payload = {"fit_statistics": stats, "selected": rpt.latent_fit_to_dict(selected)}
        _write_json(sink.path("latent_class_report.json"), payload)
        with open(sink.path("latent_class_posteriors.csv"), "w", encoding="utf-8") as fh:
            fh.write("respondent_id," + ",".join(f"class{k + 1}" for k in range(selected.K)) + "\n")
            for rid in subset.respondent_ids:
                probs = posterior_class_probs(selected, subset, rid)
                fh.write(rid + "," + ",".join(f"{p:.6f}" for p in probs) + "\n")


def _stage_wtp(config, state, sink: _StageSink):
    fits = state.get("fits", {})
    if not fits:
        raise InputError("wtp stage requires clogit/gmnl fits")
    reports = []
    for (model, scenario), fit in sorted(fits.items()):
        reports.append(compute_wtp(fit))
    state["wtp_reports"] = reports
    _write_json(sink.path("wtp_report.json"), {"reports": [rpt.wtp_to_dict(r) for r in reports]})


def _stage_wtac(config, state, sink: _StageSink):
    fit = state.get("sbdc_fit")
    if fit is None:
        raise InputError("wtac stage requires an sbdc fit")
    median = wtac_median(fit)
    payload = rpt.sbdc_fit_to_dict(fit)
    payload["wtac_median"] = median
    individual = None
    if config["wtac"]["individual"] and fit.spec == "extended":
        individual = wtac_individual(fit, state["sbdc_data"])
        payload["individual"] = {
            "median": individual["median"],
            "mean": individual["mean"],
            "quantiles": {str(k): v for k, v in individual["quantiles"].items()},
        }
    state["wtac_median"] = median
    state["wtac_individual"] = individual
    _write_json(sink.path("wtac_report.json"), payload)


def _stage_welfare(config, state, sink: _StageSink):
    cfg = config["welfare"]
    groups = (
        _ingest_step(ingest_groups, cfg["groups_path"])
        if cfg.get("groups_path")
        else default_groups(bool(cfg["income_weighted"]))
    )
    svtt = cfg.get("svtt")
    if svtt is None:
        reports = state.get("wtp_reports") or []
        work_cl = [r for r in reports if r.model == "clogit" and r.scenario == "work"]
        if not work_cl:
            raise InputError("welfare stage needs svtt: none configured and no work-scenario clogit WTP available")
        svtt = work_cl[0].value("wait", "yuan_per_hour")
    spt = spt_table(float(svtt), groups)
    report = welfare_change(spt, groups, float(cfg["delta_t_hours"]), svtt=float(svtt))
    state["welfare"] = (report, groups, spt)
    _write_json(sink.path("welfare_report.json"), rpt.welfare_to_dict(report, groups))


def _stage_report(config, state, sink: _StageSink):
    h = state["cfg_hash"]
    parts = [f"# Valuation report\n\nEffective config hash: `{h}`\n"]
    if "design" in state:
        audit = audit_design(state["design"])
        parts.append(rpt._caption("Design audit", h) + "```json\n" + json.dumps(audit, indent=2, sort_keys=True) + "\n```\n")
    if "sbdc_fit" in state and "wtac_median" in state:
        parts.append(rpt.access_markdown(state["sbdc_fit"], state["wtac_median"], state.get("wtac_individual"), h))
    if state.get("fits"):
        parts.append(rpt.attribute_fits_markdown(state["fits"], h))
    if state.get("wtp_reports"):
        parts.append(rpt.wtp_markdown(state["wtp_reports"], h))
    if state.get("lc_stats"):
        parts.append(rpt.latent_stats_markdown(state["lc_stats"], h))
    if state.get("lc_fit") is not None:
        parts.append(rpt.latent_class_markdown(state["lc_fit"], h))
    if state.get("welfare"):
        report, groups, spt = state["welfare"]
        parts.append(rpt.spt_markdown(spt, groups, h))
        parts.append(rpt.welfare_markdown(report, groups, h))
    parts.append(rpt.encoding_markdown(DEFAULT_ENCODING, h))
    parts.append("## Effective configuration\n\n```yaml\n" + effective_config_dump(config) + "```\n")
    with open(sink.path("report.md"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


_STAGES = {
    "design": _stage_design,
    "simulate": _stage_simulate,
    "fit": _stage_fit,
    "wtp": _stage_wtp,
    "wtac": _stage_wtac,
    "welfare": _stage_welfare,
    "report": _stage_report,
}
