import math

import numpy as np
import pytest

from choiceval.access import (
    SbdcConfig,
    SbdcDataset,
    SbdcObservation,
    acceptance_probability,
    fit_sbdc,
    marginal_loglik,
    wtac_individual,
    wtac_median,
)
from choiceval.errors import ConfigError, DomainError, InputError, SeparationError
from choiceval.synth import SbdcTruth, TruthSpec, simulate_sbdc

TABLE4_BASE = SbdcTruth(beta0=-6.132, beta_c=0.961, sigma=0.5)


def make_fit(beta0, beta_c, spec="base", beta_x=None, sigma=0.0):
    """Hand-built fit object for closed-form checks."""
    from choiceval.access import SbdcFit

    beta_x = beta_x or {}
    names = ("beta0", "log_compensation") + tuple(beta_x) + ("sigma_intercept",)
    return SbdcFit(
        spec=spec, beta0_mean=beta0, beta_c=beta_c, beta_x=beta_x, sigma_intercept=sigma,
        se={n: float("nan") for n in names}, cov=np.eye(len(names)), param_names=names,
        llf=0.0, n_obs=0, n_respondents=0, converged=True, n_iter=0,
    )


@pytest.fixture(scope="module")
def base_data():
    truth = TruthSpec("sbdc", TABLE4_BASE, seed=3)
    return simulate_sbdc(truth, n_respondents=525)


@pytest.fixture(scope="module")
def base_fit(base_data):
    return fit_sbdc(base_data)


class TestFitSbdc:
    def test_parameter_recovery_at_published_truth(self, base_fit):
        truth = {"beta0": -6.132, "log_compensation": 0.961, "sigma_intercept": 0.5}
        estimates = {
            "beta0": base_fit.beta0_mean,
            "log_compensation": base_fit.beta_c,
            "sigma_intercept": base_fit.sigma_intercept,
        }
        for name, true_value in truth.items():
            z = (estimates[name] - true_value) / base_fit.se[name]
            assert abs(z) < 3.0, (name, z)

    def test_degenerate_variance_matches_plain_logit(self):
        truth = TruthSpec("sbdc", SbdcTruth(beta0=-6.132, beta_c=0.961, sigma=0.0), seed=0)
        data = simulate_sbdc(truth, n_respondents=525)
        free = fit_sbdc(data)
        plain = fit_sbdc(data, config=SbdcConfig(fix_sigma=0.0))
        assert abs(free.beta0_mean - plain.beta0_mean) < 1e-3
        assert abs(free.beta_c - plain.beta_c) < 1e-3

    def test_all_identical_responses_is_separation(self):
        obs = [
            SbdcObservation(f"r{i}", c, False)
            for i in range(40)
            for c in (100.0, 500.0, 1000.0, 3000.0)
        ]
        with pytest.raises(SeparationError):
            fit_sbdc(SbdcDataset(obs))

    def test_threshold_separation_names_compensation(self):
        obs = [
            SbdcObservation(f"r{i}", c, c >= 1500)
            for i in range(40)
            for c in (100.0, 500.0, 1500.0, 3000.0)
        ]
        with pytest.raises(SeparationError) as exc:
            fit_sbdc(SbdcDataset(obs))
        assert exc.value.culprit == "compensation"

    def test_needs_two_compensation_levels(self):
        obs = [SbdcObservation(f"r{i}", 500.0, i % 2 == 0) for i in range(20)]
        with pytest.raises(InputError):
            fit_sbdc(SbdcDataset(obs))

    def test_unknown_spec_rejected(self, base_data):
        with pytest.raises(ConfigError):
            fit_sbdc(base_data, spec="huge")


class TestQuadrature:
    def test_node_refinement_converges(self, base_data, base_fit):
        ll32 = marginal_loglik(base_data, base_fit.beta0_mean, base_fit.beta_c, {}, 0.5, 32)
        ll64 = marginal_loglik(base_data, base_fit.beta0_mean, base_fit.beta_c, {}, 0.5, 64)
        assert abs(ll32 - ll64) / abs(ll64) < 1e-6

    def test_vanishing_sigma_recovers_plain_likelihood(self, base_data, base_fit):
        near_zero = marginal_loglik(base_data, base_fit.beta0_mean, base_fit.beta_c, {}, 1e-8, 32)
        log_c = np.log([o.compensation for o in base_data.observations])
        y = np.array([float(o.accepted) for o in base_data.observations])
        eta = base_fit.beta0_mean + base_fit.beta_c * log_c
        plain = float(np.sum(y * -np.logaddexp(0, -eta) + (1 - y) * -np.logaddexp(0, eta)))
        assert abs(near_zero - plain) / abs(plain) < 1e-8

    def test_matches_dense_grid_oracle(self):
        from choiceval.synth import brute_force_loglik

        truth = TruthSpec("sbdc", TABLE4_BASE, seed=21)
        data = simulate_sbdc(truth, n_respondents=200)  # 800 obs, under the oracle guard
        engine = marginal_loglik(data, TABLE4_BASE.beta0, TABLE4_BASE.beta_c, {}, TABLE4_BASE.sigma, 32)
        oracle = brute_force_loglik(data, TABLE4_BASE, "sbdc")
        assert abs(engine - oracle) / abs(oracle) < 1e-4


class TestWtacMedian:
    def test_published_base_coefficients(self):
        fit = make_fit(-6.132, 0.961)
        value = wtac_median(fit)
        assert value == pytest.approx(math.exp(6.132 / 0.961), rel=1e-12)
        assert abs(value - 588.0) / 588.0 < 0.01

    def test_unit_point(self):
        assert wtac_median(make_fit(0.0, 1.0)) == pytest.approx(1.0, rel=1e-15)

    def test_indifference_probability_is_half(self):
        fit = make_fit(-6.132, 0.961)
        c = wtac_median(fit)
        assert acceptance_probability(fit, c) == pytest.approx(0.5, abs=1e-10)

    def test_monotone_in_compensation(self, base_fit):
        probs = [acceptance_probability(base_fit, c) for c in (100, 500, 1000, 2000, 3000)]
        assert all(b > a for a, b in zip(probs, probs[1:]))

    def test_nonpositive_slope_rejected(self):
        with pytest.raises(DomainError):
            wtac_median(make_fit(-6.0, 0.0))
        with pytest.raises(DomainError):
            wtac_median(make_fit(-6.0, -0.5))


class TestWtacIndividual:
    def test_zero_covariates_match_base_closed_form(self):
        fit = make_fit(-6.132, 0.961, spec="extended", beta_x={"income": 0.185})
        data = SbdcDataset(
            [SbdcObservation("r1", 500.0, True), SbdcObservation("r1", 1000.0, True)],
            {"r1": {"income": 0.0}},
        )
        result = wtac_individual(fit, data)
        assert result["per_respondent"]["r1"] == pytest.approx(wtac_median(make_fit(-6.132, 0.961)), rel=1e-12)

    def test_sign_rule_positive_coefficient_lowers_threshold(self):
        fit = make_fit(-6.132, 0.961, spec="extended", beta_x={"income": 0.185})
        data = SbdcDataset(
            [SbdcObservation("r1", 500.0, True), SbdcObservation("r2", 500.0, False)],
            {"r1": {"income": 1.0}, "r2": {"income": 2.0}},
        )
        result = wtac_individual(fit, data)["per_respondent"]
        assert result["r2"] < result["r1"]  # higher income, lower indifference point

    def test_missing_covariate_names_respondent(self):
        fit = make_fit(-6.132, 0.961, spec="extended", beta_x={"income": 0.185})
        data = SbdcDataset([SbdcObservation("r9", 500.0, True)], {"r9": {}})
        with pytest.raises(InputError, match="r9.*income"):
            wtac_individual(fit, data)

    def test_base_fit_rejected(self):
        fit = make_fit(-6.132, 0.961)
        with pytest.raises(ConfigError):
            wtac_individual(fit, SbdcDataset([SbdcObservation("r1", 500.0, True)]))

    def test_recovery_of_individual_threshold_median(self):
        # three-covariate extended model; the intercept keeps the implied
        # thresholds inside the compensation grid so the fit is well posed.
        # The indifference point is exponentially sensitive to coefficient
        # noise, so this needs a large fixed-seed sample to sit inside 5%.
        truth = SbdcTruth(
            beta0=-7.0, beta_c=1.096, sigma=0.0,
            beta_x={"income_code": 0.185, "male": -0.366, "driving_license": -0.692},
        )
        rng = np.random.default_rng(2)
        observations, covariates = [], {}
        levels = np.array([100.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0])
        true_ci = []
        for i in range(4000):
            rid = f"r{i:05d}"
            row = {
                "income_code": float(rng.integers(1, 7)),
                "male": float(rng.random() < 0.47),
                "driving_license": float(rng.random() < 0.55),
            }
            covariates[rid] = row
            shift = sum(truth.beta_x[k] * v for k, v in row.items())
            true_ci.append(math.exp(-(truth.beta0 + shift) / truth.beta_c))
            for c in rng.choice(levels, size=6, replace=False):
                eta = truth.beta0 + truth.beta_c * math.log(c) + shift
                p = 1 / (1 + math.exp(-eta))
                observations.append(SbdcObservation(rid, float(c), bool(rng.random() < p)))
        data = SbdcDataset(observations, covariates)
        fit = fit_sbdc(data, spec="extended")
        result = wtac_individual(fit, data)
        true_median = float(np.median(true_ci))
        assert abs(result["median"] - true_median) / true_median < 0.05
