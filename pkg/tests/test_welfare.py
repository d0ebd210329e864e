import numpy as np
import pytest

from choiceval.errors import InputError
from choiceval.welfare import (
    IncomeGroup,
    default_groups,
    pricing_headroom,
    spt_table,
    welfare_change,
)

TABLE9_SPT = {
    "under_4000": 19.32,
    "4000_8000": 57.96,
    "8000_12000": 96.6,
    "12000_16000": 135.24,
    "16000_20000": 173.88,
    "above_20000": 212.52,
}


class TestSptTable:
    def test_reproduces_all_income_rows(self):
        spt = spt_table(96.6, default_groups(), 10000.0)
        for bracket, expected in TABLE9_SPT.items():
            assert spt[bracket] == pytest.approx(expected, rel=1e-12)

    def test_reference_income_group_keeps_svtt(self):
        spt = spt_table(96.6, default_groups(), 10000.0)
        assert spt["8000_12000"] == pytest.approx(96.6, rel=1e-15)

    def test_homogeneous_in_svtt_and_income(self):
        groups = default_groups()
        base = spt_table(50.0, groups, 10000.0)
        doubled_svtt = spt_table(100.0, groups, 10000.0)
        for b in base:
            assert doubled_svtt[b] == pytest.approx(2 * base[b], rel=1e-12)
        scaled_groups = [IncomeGroup(g.bracket, 2 * g.income, g.size, g.omega) for g in groups]
        doubled_income = spt_table(50.0, scaled_groups, 10000.0)
        for b in base:
            assert doubled_income[b] == pytest.approx(2 * base[b], rel=1e-12)

    def test_nonpositive_inputs_rejected(self):
        with pytest.raises(InputError):
            spt_table(0.0, default_groups())
        with pytest.raises(InputError):
            IncomeGroup("x", -1.0, 10)


class TestWelfareChange:
    def test_largest_group_row(self):
        groups = default_groups()
        report = welfare_change(spt_table(96.6, groups), groups, 1.0, svtt=96.6)
        assert report.group_delta_w["8000_12000"] == pytest.approx(18547.20, rel=1e-12)

    def test_total_and_per_minute(self):
        groups = default_groups()
        report = welfare_change(spt_table(96.6, groups), groups, 1.0, svtt=96.6)
        # row-by-row arithmetic: sum of size_q * SPT_q
        expected = sum(n * TABLE9_SPT[b] for b, _, n in
                       [(g.bracket, g.income, g.size) for g in groups])
        assert report.total_per_hour == pytest.approx(60490.92, rel=1e-12)
        assert report.total_per_hour == pytest.approx(expected, rel=1e-12)
        assert report.total_per_minute == pytest.approx(report.total_per_hour / 60.0, rel=1e-15)

    def test_zero_delta_t_zeroes_everything(self):
        groups = default_groups()
        report = welfare_change(spt_table(96.6, groups), groups, 0.0, svtt=96.6)
        assert report.total_per_hour == 0.0
        assert all(v == 0.0 for v in report.group_delta_w.values())

    def test_total_equals_sum_of_rows_and_is_permutation_invariant(self):
        groups = default_groups()
        spt = spt_table(96.6, groups)
        fwd = welfare_change(spt, groups, 1.0, svtt=96.6)
        rev = welfare_change(spt, list(reversed(groups)), 1.0, svtt=96.6)
        assert fwd.total_per_hour == pytest.approx(sum(fwd.group_delta_w.values()), rel=1e-15)
        assert fwd.total_per_hour == pytest.approx(rev.total_per_hour, rel=1e-15)

    def test_income_inverse_weights_make_per_capita_income_independent(self):
        groups = default_groups(income_weighted=True)
        spt = spt_table(96.6, groups, 10000.0)
        report = welfare_change(spt, groups, 1.0, svtt=96.6)
        # omega = 1/income cancels the income scaling: per-capita contribution
        # is svtt * delta_t / reference for every group
        for g in groups:
            per_capita = report.group_delta_w[g.bracket] / g.size
            assert per_capita == pytest.approx(96.6 / 10000.0, rel=1e-12)

    def test_missing_group_in_spt_rejected(self):
        groups = default_groups()
        spt = spt_table(96.6, groups)
        del spt["under_4000"]
        with pytest.raises(InputError, match="under_4000"):
            welfare_change(spt, groups, 1.0)

    def test_group_sizes_sum_to_sample(self):
        assert sum(g.size for g in default_groups()) == 525


class TestPricingHeadroom:
    def test_half_hour_saving_against_top_fee(self):
        assert pricing_headroom(96.6, 0.5, 2.4) == pytest.approx(45.9, rel=1e-12)

    def test_breakeven_fee(self):
        assert pricing_headroom(96.6, 0.5, 96.6 * 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_zero_saving_is_negative_fee(self):
        assert pricing_headroom(96.6, 0.0, 1.4) == pytest.approx(-1.4, rel=1e-12)

    def test_negative_inputs_rejected(self):
        with pytest.raises(InputError):
            pricing_headroom(96.6, -0.1, 1.0)
        with pytest.raises(InputError):
            pricing_headroom(96.6, 0.1, -1.0)
