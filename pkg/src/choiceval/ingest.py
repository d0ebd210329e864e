"""CSV ingestion, validation, and writing for the three data schemas.

Schemas (fixed header prefixes; covariate columns append after the core
fields, and ``completion_seconds`` among them is treated as a data-quality
field rather than a model covariate):

  responses_sbdc.csv  respondent_id,task_no,compensation_yuan,accepted,<covariates...>
  responses_sce.csv   respondent_id,scenario,task_no,alt_index,wait_min,cost_yuan,unrel_min,chosen,<covariates...>
  groups.csv          bracket,income_yuan,size,omega

Quality filters: a configurable minimum completion time (120 s default) and a
straight-lining detector (same alternative position chosen on every
stated-choice task). Flagged respondents are dropped in strict mode and
reported either way. Replication mode rejects attribute levels and
compensation amounts outside the published grids.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .access import SBDC_COMPENSATION_LEVELS, SbdcDataset, SbdcObservation
from .core import ATTRIBUTES, REPLICATION_LEVELS, AttributeProfile, ChoiceTask, Dataset, Observation
from .covariates import COMPLETION_SECONDS, DEFAULT_ENCODING, CovariateEncoding
from .errors import InputError
from .welfare import IncomeGroup

SBDC_HEADER = ["respondent_id", "task_no", "compensation_yuan", "accepted"]
SCE_HEADER = ["respondent_id", "scenario", "task_no", "alt_index", "wait_min", "cost_yuan", "unrel_min", "chosen"]
GROUPS_HEADER = ["bracket", "income_yuan", "size", "omega"]

MIN_COMPLETION_SECONDS = 120.0


@dataclass(frozen=True)
class IngestConfig:
    replication_mode: bool = True
    strict: bool = False
    min_completion_seconds: float = MIN_COMPLETION_SECONDS
    encoding: CovariateEncoding = dc_field(default_factory=lambda: DEFAULT_ENCODING)


@dataclass
class QualityReport:
    n_rows: int = 0
    n_respondents: int = 0
    flagged_fast: list[str] = dc_field(default_factory=list)
    flagged_straight_lining: list[str] = dc_field(default_factory=list)
    excluded: list[str] = dc_field(default_factory=list)


def _cell(row: dict, column: str, row_no: int, kind=float):
    raw = row.get(column)
    if raw is None or raw == "":
        raise InputError(f"row {row_no}: missing column {column!r}")
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise InputError(f"row {row_no}, column {column!r}: cannot parse {raw!r}") from None


def _read_rows(path, expected_prefix: list[str]):
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if header[: len(expected_prefix)] != expected_prefix:
            raise InputError(
                f"{path.name}: header must start with {','.join(expected_prefix)}; got {','.join(header)}"
            )
        extras = [c for c in header[len(expected_prefix):]]
        rows = list(reader)
    return rows, extras


def _parse_covariates(row: dict, extras: list[str], row_no: int, encoding: CovariateEncoding) -> tuple[dict, float | None]:
    values: dict[str, float] = {}
    completion = None
    for name in extras:
        raw = row.get(name)
        if raw is None or raw == "":
            raise InputError(f"row {row_no}: missing column {name!r}")
        if name == COMPLETION_SECONDS:
            completion = _cell(row, name, row_no)
            continue
        if name in encoding:
            values[name] = encoding[name].encode(raw)
        else:
            try:
                values[name] = float(raw)
            except ValueError:
                raise InputError(
                    f"row {row_no}, column {name!r}: unknown covariate with non-numeric value {raw!r}"
                ) from None
    return values, completion


def _merge_respondent_row(store: dict, rid: str, values: dict, row_no: int) -> None:
    prev = store.setdefault(rid, values)
    if prev is not values and prev != values:
        raise InputError(f"row {row_no}: respondent {rid!r} has conflicting covariate values")


def ingest_sbdc(path, config: IngestConfig = IngestConfig()) -> tuple[SbdcDataset, QualityReport]:
    """Read and validate an SBDC response file."""
    rows, extras = _read_rows(path, SBDC_HEADER)
    observations: list[SbdcObservation] = []
    covariates: dict[str, dict] = {}
    completion: dict[str, float] = {}
    seen: set[tuple[str, int]] = set()
    for i, row in enumerate(rows, start=2):  # header is line 1
        rid = str(row["respondent_id"])
        task_no = int(_cell(row, "task_no", i))
        if (rid, task_no) in seen:
            raise InputError(f"row {i}: duplicate (respondent {rid!r}, task {task_no})")
        seen.add((rid, task_no))
        comp = _cell(row, "compensation_yuan", i)
        if config.replication_mode and comp not in SBDC_COMPENSATION_LEVELS:
            raise InputError(
                f"row {i}, column 'compensation_yuan': {comp} not in the "
                f"compensation grid {list(SBDC_COMPENSATION_LEVELS)}"
            )
        accepted_raw = str(row["accepted"]).strip().lower()
        if accepted_raw not in ("0", "1", "true", "false"):
            raise InputError(f"row {i}, column 'accepted': expected 0/1, got {row['accepted']!r}")
        values, comp_secs = _parse_covariates(row, extras, i, config.encoding)
        _merge_respondent_row(covariates, rid, values, i)
        if comp_secs is not None:
            completion[rid] = comp_secs
        observations.append(SbdcObservation(rid, comp, accepted_raw in ("1", "true")))

    report = QualityReport(n_rows=len(rows))
    keep = _apply_completion_filter(completion, config, report)
    observations = [o for o in observations if keep(o.respondent_id)]
    data = SbdcDataset(observations, {r: v for r, v in covariates.items() if keep(r)})
    report.n_respondents = len(data.respondent_ids)
    return data, report


def ingest_sce(path, config: IngestConfig = IngestConfig()) -> tuple[Dataset, QualityReport]:
    """Read and validate a stated-choice response file (long format)."""
    rows, extras = _read_rows(path, SCE_HEADER)
    # group rows into (respondent, scenario, task) alternative sets
    grouped: dict[tuple[str, str, int], dict[int, tuple]] = {}
    chosen_map: dict[tuple[str, str, int], int] = {}
    covariates: dict[str, dict] = {}
    completion: dict[str, float] = {}
    row_of_task: dict[tuple[str, str, int], int] = {}
    for i, row in enumerate(rows, start=2):
        rid = str(row["respondent_id"])
        scenario = str(row["scenario"])
        task_no = int(_cell(row, "task_no", i))
        alt_index = int(_cell(row, "alt_index", i))
        profile = tuple(_cell(row, c, i) for c in ("wait_min", "cost_yuan", "unrel_min"))
        if config.replication_mode:
            for name, value in zip(ATTRIBUTES, profile):
                if value not in REPLICATION_LEVELS[name]:
                    raise InputError(
                        f"row {i}, column '{name}': level {value} not in the "
                        f"attribute grid {list(REPLICATION_LEVELS[name])}"
                    )
        key = (rid, scenario, task_no)
        alts = grouped.setdefault(key, {})
        if alt_index in alts:
            raise InputError(f"row {i}: duplicate alternative {alt_index} for task {key}")
        alts[alt_index] = profile
        row_of_task[key] = i
        if int(_cell(row, "chosen", i)) == 1:
            if key in chosen_map:
                raise InputError(f"row {i}: task {key} has more than one chosen alternative")
            chosen_map[key] = alt_index
        values, comp_secs = _parse_covariates(row, extras, i, config.encoding)
        _merge_respondent_row(covariates, rid, values, i)
        if comp_secs is not None:
            completion[rid] = comp_secs

    observations: list[Observation] = []
    position_choices: dict[str, list[int]] = {}
    for key, alts in grouped.items():
        rid, scenario, task_no = key
        row_no = row_of_task[key]
        if sorted(alts) != list(range(len(alts))):
            raise InputError(f"row {row_no}: task {key} has gaps in alt_index")
        if key not in chosen_map:
            raise InputError(f"row {row_no}: task {key} has no chosen alternative")
        profiles = tuple(AttributeProfile(*alts[j]) for j in sorted(alts))
        task = ChoiceTask(task_id=f"{scenario}-{task_no:02d}", alternatives=profiles, scenario=scenario)
        observations.append(Observation(rid, task, chosen_map[key]))
        position_choices.setdefault(rid, []).append(chosen_map[key])

    report = QualityReport(n_rows=len(rows))
    for rid, picks in sorted(position_choices.items()):
        if len(picks) >= 2 and len(set(picks)) == 1:
            report.flagged_straight_lining.append(rid)
    keep_completion = _apply_completion_filter(completion, config, report)

    def keep(rid: str) -> bool:
        if not keep_completion(rid):
            return False
        if config.strict and rid in report.flagged_straight_lining:
            if rid not in report.excluded:
                report.excluded.append(rid)
            return False
        return True

    observations = [o for o in observations if keep(o.respondent_id)]
    data = Dataset(observations, {r: v for r, v in covariates.items() if keep(r)})
    report.n_respondents = len(data.respondent_ids)
    return data, report


def _apply_completion_filter(completion: dict[str, float], config: IngestConfig, report: QualityReport):
    flagged = {
        rid for rid, secs in completion.items() if secs < config.min_completion_seconds
    }
    report.flagged_fast.extend(sorted(flagged))
    if config.strict:
        report.excluded.extend(sorted(flagged))

    def keep(rid: str) -> bool:
        return not (config.strict and rid in flagged)

    return keep


def ingest_groups(path) -> list[IncomeGroup]:
    rows, _ = _read_rows(path, GROUPS_HEADER)
    groups = []
    for i, row in enumerate(rows, start=2):
        groups.append(
            IncomeGroup(
                bracket=str(row["bracket"]),
                income=_cell(row, "income_yuan", i),
                size=int(_cell(row, "size", i)),
                omega=_cell(row, "omega", i),
            )
        )
    return groups


def ingest(path, schema: str, config: IngestConfig = IngestConfig()):
    """Dispatch on schema name: 'sbdc', 'sce', or 'groups'."""
    if schema == "sbdc":
        return ingest_sbdc(path, config)
    if schema == "sce":
        return ingest_sce(path, config)
    if schema == "groups":
        return ingest_groups(path)
    raise InputError(f"unknown schema {schema!r}")


# ---------------------------------------------------------------------------
# writers (schemas shared with the collection service export)


def _covariate_columns(covariates: dict[str, dict], encoding: CovariateEncoding) -> list[str]:
    names: dict[str, None] = {}
    for row in covariates.values():
        for name in row:
            names.setdefault(name, None)
    return list(names)


def write_sbdc_csv(data: SbdcDataset, path, encoding: CovariateEncoding = DEFAULT_ENCODING) -> None:
    extras = _covariate_columns(data.covariates, encoding)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SBDC_HEADER + extras)
        task_no: dict[str, int] = {}
        for o in data.observations:
            task_no[o.respondent_id] = task_no.get(o.respondent_id, 0) + 1
            row = [o.respondent_id, task_no[o.respondent_id], _fmt(o.compensation), int(o.accepted)]
            cov = data.covariates.get(o.respondent_id, {})
            for name in extras:
                value = cov.get(name, "")
                if value != "" and name in encoding:
                    value = encoding[name].decode(value)
                row.append(_fmt(value))
            w.writerow(row)


def write_sce_csv(data: Dataset, path, encoding: CovariateEncoding = DEFAULT_ENCODING) -> None:
    extras = _covariate_columns(data.covariates, encoding)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SCE_HEADER + extras)
        task_no: dict[tuple[str, str], int] = {}
        for o in data.observations:
            key = (o.respondent_id, o.task.scenario or "")
            task_no[key] = task_no.get(key, 0) + 1
            cov = data.covariates.get(o.respondent_id, {})
            extra_vals = []
            for name in extras:
                value = cov.get(name, "")
                if value != "" and name in encoding:
                    value = encoding[name].decode(value)
                extra_vals.append(_fmt(value))
            for j, alt in enumerate(o.task.alternatives):
                w.writerow(
                    [o.respondent_id, o.task.scenario, task_no[key], j,
                     _fmt(alt.wait), _fmt(alt.cost), _fmt(alt.unrel), int(j == o.chosen_index)]
                    + extra_vals
                )


def write_groups_csv(groups: list[IncomeGroup], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(GROUPS_HEADER)
        for g in groups:
            w.writerow([g.bracket, _fmt(g.income), g.size, _fmt(g.omega)])


def _fmt(value):
    if isinstance(value, float) and value == int(value):
        return int(value)
    return value
