"""Social price of time and aggregate welfare change across income groups.

The private time value (a ¥/hour willingness-to-pay figure) is rescaled per
income group in proportion to the group's representative income relative to a
reference income, then aggregated over group sizes with optional social
weights.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError

# Sample income brackets: label, representative income (bracket midpoint;
# top bracket pinned at 22000), respondent count. Sizes sum to 525.
DEFAULT_INCOME_GROUPS = (
    ("under_4000", 2000.0, 20),
    ("4000_8000", 6000.0, 87),
    ("8000_12000", 10000.0, 192),
    ("12000_16000", 14000.0, 112),
    ("16000_20000", 18000.0, 74),
    ("above_20000", 22000.0, 40),
)

#: midpoint of the 8000-12000 bracket; the group whose time value equals the
#: private figure unchanged
DEFAULT_REFERENCE_INCOME = 10000.0


@dataclass(frozen=True)
class IncomeGroup:
    bracket: str
    income: float
    size: int
    omega: float = 1.0

    def __post_init__(self):
        if self.income <= 0:
            raise InputError(f"group {self.bracket!r}: income must be positive")
        if self.size < 0:
            raise InputError(f"group {self.bracket!r}: negative size")
        if self.omega < 0:
            raise InputError(f"group {self.bracket!r}: negative social weight")


def default_groups(income_weighted: bool = False) -> list[IncomeGroup]:
    """The sample's six income groups; ``income_weighted`` sets omega to 1/income."""
    return [
        IncomeGroup(b, inc, n, omega=(1.0 / inc if income_weighted else 1.0))
        for b, inc, n in DEFAULT_INCOME_GROUPS
    ]


@dataclass(frozen=True)
class WelfareReport:
    svtt: float
    reference_income: float
    delta_t_hours: float
    group_spt: dict[str, float]
    group_delta_w: dict[str, float]
    total_per_hour: float
    total_per_minute: float


def spt_table(svtt: float, groups: list[IncomeGroup], reference_income: float = DEFAULT_REFERENCE_INCOME) -> dict[str, float]:
    """Per-group social price of time: svtt scaled by income relative to the reference.

    Homogeneous of degree 1 in both svtt and group income; a group at the
    reference income keeps the private value unchanged.
    """
    if svtt <= 0:
        raise InputError("svtt must be positive")
    if reference_income <= 0:
        raise InputError("reference income must be positive")
    return {g.bracket: svtt * g.income / reference_income for g in groups}


def welfare_change(
    spt: dict[str, float],
    groups: list[IncomeGroup],
    delta_t_hours: float = 1.0,
    svtt: float = float("nan"),
    reference_income: float = DEFAULT_REFERENCE_INCOME,
) -> WelfareReport:
    """Aggregate welfare change: omega x size x SPT x time saved, summed over groups.

    ``svtt`` and ``reference_income`` are carried into the report as metadata
    about how the SPT table was built.
    """
    if delta_t_hours < 0:
        raise InputError("delta_t must be non-negative")
    missing = [g.bracket for g in groups if g.bracket not in spt]
    if missing:
        raise InputError(f"groups missing from SPT table: {missing}")
    per_group = {g.bracket: g.omega * g.size * spt[g.bracket] * delta_t_hours for g in groups}
    total = sum(per_group.values())
    return WelfareReport(
        svtt=svtt,
        reference_income=reference_income,
        delta_t_hours=delta_t_hours,
        group_spt=dict(spt),
        group_delta_w=per_group,
        total_per_hour=total,
        total_per_minute=total / 60.0,
    )


def pricing_headroom(svtt: float, time_saved_hours: float, current_fee: float) -> float:
    """Consumer surplus left after the fee: svtt x time saved minus the current fee.

    Negative when the fee already exceeds the value of the time saved.
    """
    if time_saved_hours < 0:
        raise InputError("time_saved must be non-negative")
    if current_fee < 0:
        raise InputError("current_fee must be non-negative")
    return svtt * time_saved_hours - current_fee
