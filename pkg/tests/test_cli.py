import json

import pytest
from click.testing import CliRunner

from choiceval.cli import main
from choiceval.design import save_design
from choiceval.synth import ClTruth, SbdcTruth, TruthSpec, save_truth


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workdir(tmp_path, design16):
    save_design(design16, tmp_path / "design.json")
    save_truth(
        TruthSpec("clogit", ClTruth({"wait": -0.034, "cost": -0.021, "unrel": -0.102}), seed=7),
        tmp_path / "truth_sce.json",
    )
    save_truth(
        TruthSpec("sbdc", SbdcTruth(beta0=-6.132, beta_c=0.961, sigma=0.5), seed=3),
        tmp_path / "truth_sbdc.json",
    )
    return tmp_path


class TestDesignVerbs:
    def test_generate_and_audit(self, runner, tmp_path):
        out = tmp_path / "design.json"
        result = runner.invoke(main, ["design", "generate", "--n-tasks", "16", "--seed", "0",
                                      "--n-restarts", "5", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()
        audit = runner.invoke(main, ["design", "audit", str(out)])
        assert audit.exit_code == 0
        payload = json.loads(audit.output)
        assert payload["n_tasks"] == 16
        assert payload["dominance_violations"] == []


class TestSimulateAndFit:
    def test_sce_roundtrip_and_fit(self, runner, workdir):
        csv = workdir / "responses_sce.csv"
        result = runner.invoke(main, [
            "simulate", "sce", "--design", str(workdir / "design.json"),
            "--truth", str(workdir / "truth_sce.json"), "--n", "150", "--out", str(csv),
        ])
        assert result.exit_code == 0, result.output
        fit_out = workdir / "fit_clogit_work.json"
        result = runner.invoke(main, ["fit", "clogit", "--data", str(csv),
                                      "--scenario", "work", "--out", str(fit_out)])
        assert result.exit_code == 0, result.output
        payload = json.loads(fit_out.read_text())
        assert payload["converged"]
        wtp_out = workdir / "wtp_report.json"
        result = runner.invoke(main, ["wtp", "--fit", str(fit_out), "--out", str(wtp_out)])
        assert result.exit_code == 0, result.output
        report = json.loads(wtp_out.read_text())
        assert report["model"] == "clogit"

    def test_sbdc_roundtrip_and_wtac(self, runner, workdir):
        csv = workdir / "responses_sbdc.csv"
        result = runner.invoke(main, [
            "simulate", "sbdc", "--truth", str(workdir / "truth_sbdc.json"),
            "--n", "200", "--out", str(csv),
        ])
        assert result.exit_code == 0, result.output
        out = workdir / "wtac_report.json"
        result = runner.invoke(main, ["wtac", "--data", str(csv), "--out", str(out)])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert 200 < payload["wtac_median"] < 2000

    def test_lclogit_verb(self, runner, workdir):
        csv = workdir / "responses_sce.csv"
        runner.invoke(main, [
            "simulate", "sce", "--design", str(workdir / "design.json"),
            "--truth", str(workdir / "truth_sce.json"), "--n", "120", "--out", str(csv),
        ])
        out = workdir / "lc.json"
        result = runner.invoke(main, ["fit", "lclogit", "--data", str(csv), "--k", "1",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert json.loads(out.read_text())["K"] == 1


class TestWelfareVerb:
    def test_default_groups(self, runner, tmp_path):
        out = tmp_path / "welfare.json"
        result = runner.invoke(main, ["welfare", "--svtt", "96.6", "--out", str(out)])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["total_per_hour"] == pytest.approx(60490.92, rel=1e-9)


class TestRunVerb:
    def test_minimal_pipeline(self, runner, tmp_path):
        config = tmp_path / "config.yaml"
        config.write_text(
            "seed: 0\n"
            "stages: [design, simulate, fit, wtp, wtac, welfare, report]\n"
            "design: {n_restarts: 5}\n"
            "simulate:\n"
            "  n_respondents: 120\n"
            "  scenarios: [work]\n"
            "  sce_truth: {family: clogit, params: {beta: {wait: -0.034, cost: -0.021, unrel: -0.102}}, seed: 7}\n"
            "  sbdc_truth: {family: sbdc, params: {beta0: -6.132, beta_c: 0.961, sigma: 0.5}, seed: 3}\n"
            "fit: {models: [sbdc, clogit], scenarios: [work]}\n"
        )
        result = runner.invoke(main, ["run", "--config", str(config), "--data-dir", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "out" / "report.md").exists()

    def test_empty_stages_noop(self, runner, tmp_path):
        config = tmp_path / "config.yaml"
        config.write_text("stages: []\n")
        result = runner.invoke(main, ["run", "--config", str(config), "--data-dir", str(tmp_path / "out")])
        assert result.exit_code == 0, result.output

    def test_missing_input_nonzero_exit_names_ingest(self, runner, tmp_path):
        config = tmp_path / "config.yaml"
        config.write_text(
            "stages: [fit]\n"
            f"fit: {{models: [clogit], scenarios: [work], sce_path: {tmp_path / 'nope.csv'}}}\n"
        )
        result = runner.invoke(main, ["run", "--config", str(config), "--data-dir", str(tmp_path / "out")])
        assert result.exit_code == 1
        assert "ingest" in result.output
