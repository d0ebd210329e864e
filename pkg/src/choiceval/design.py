"""Choice-experiment design: candidate enumeration, dominance pruning, and
D-efficient subset selection with balance diagnostics.

The candidate universe is every unordered pair of distinct attribute profiles
on a level grid. Pairs where one alternative is weakly better on every
attribute (and strictly better on at least one) are mechanical choices and get
pruned. From the remaining pool a fixed-size design is chosen by minimizing
the D-error of the conditional-logit information matrix under a coefficient
prior (zero prior by default), via greedy seeding plus pairwise exchange over
multiple random restarts.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .core import ATTRIBUTES, REPLICATION_LEVELS, AttributeProfile, ChoiceTask, Coefficients, softmax_probabilities
from .errors import InputError

_PLACEHOLDER_LEVEL = 1.0  # canonical attributes a spec leaves out are pinned here


@dataclass(frozen=True)
class AttributeSpec:
    """Grid of attribute levels to design over.

    ``attributes`` maps a canonical attribute name to its ordered level list;
    ``units`` and ``lower_is_better`` are per-attribute metadata. Attributes
    not listed are pinned at a constant and excluded from efficiency and
    dominance computations.
    """

    attributes: dict[str, tuple[float, ...]]
    units: dict[str, str] = field(default_factory=dict)
    lower_is_better: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if not self.attributes:
            raise InputError("spec needs at least one attribute")
        for name, levels in self.attributes.items():
            if name not in ATTRIBUTES:
                raise InputError(f"unknown attribute {name!r}; expected one of {ATTRIBUTES}")
            if len(levels) < 2:
                raise InputError(f"attribute {name!r} needs at least 2 levels")
            if list(levels) != sorted(set(levels)):
                raise InputError(f"attribute {name!r} levels must be strictly increasing")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a for a in ATTRIBUTES if a in self.attributes)

    @property
    def n_profiles(self) -> int:
        n = 1
        for levels in self.attributes.values():
            n *= len(levels)
        return n

    def direction_sign(self, name: str) -> float:
        # +1 when lower is better (the default for all three delivery attributes)
        return 1.0 if self.lower_is_better.get(name, True) else -1.0

    def profiles(self) -> list[AttributeProfile]:
        """All level combinations, in lexicographic level-index order."""
        grids = [self.attributes[a] for a in self.names]
        out = []
        for combo in itertools.product(*grids):
            values = dict(zip(self.names, combo))
            out.append(
                AttributeProfile(
                    wait=values.get("wait", _PLACEHOLDER_LEVEL),
                    cost=values.get("cost", _PLACEHOLDER_LEVEL),
                    unrel=values.get("unrel", _PLACEHOLDER_LEVEL),
                )
            )
        return out


def table_grid_spec() -> AttributeSpec:
    """The replication-mode 3x3x3 grid (waiting 30/60/90, cost 50/100/150, ±5/10/15)."""
    return AttributeSpec(
        attributes={a: REPLICATION_LEVELS[a] for a in ATTRIBUTES},
        units={"wait": "min", "cost": "yuan", "unrel": "min"},
    )


@dataclass
class Design:
    """A selected set of choice tasks plus its efficiency and balance diagnostics."""

    tasks: list[ChoiceTask]
    d_error: float
    balance_report: dict[str, dict[float, int]]
    prior: Coefficients
    spec: AttributeSpec | None = None

    def __post_init__(self):
        if not self.d_error > 0:
            raise InputError(f"d_error must be positive, got {self.d_error}")
        bad = [t.task_id for t in self.tasks if _pair_dominated(t)]
        if bad:
            raise InputError(f"design contains dominated pairs: {bad}")


def _task_id(i: int, j: int, width: int) -> str:
    return f"p{i:0{width}d}-p{j:0{width}d}"


def enumerate_pairs(spec: AttributeSpec) -> list[ChoiceTask]:
    """All unordered pairs of distinct profiles on the spec grid: C(L, 2) tasks."""
    profiles = spec.profiles()
    if len(profiles) < 2:
        raise InputError("spec yields a single profile; no pairs to enumerate")
    width = len(str(len(profiles) - 1))
    return [
        ChoiceTask(task_id=_task_id(i, j, width), alternatives=(profiles[i], profiles[j]))
        for i, j in itertools.combinations(range(len(profiles)), 2)
    ]


def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    # arrays already direction-normalized so that smaller is better
    return bool(np.all(a <= b) and np.any(a < b))


def _pair_dominated(task: ChoiceTask, spec: AttributeSpec | None = None) -> bool:
    names = spec.names if spec is not None else ATTRIBUTES
    signs = np.array([spec.direction_sign(n) if spec is not None else 1.0 for n in names])
    cols = [ATTRIBUTES.index(n) for n in names]
    X = task.attribute_matrix()[:, cols] * signs
    for i, j in itertools.combinations(range(len(X)), 2):
        if _dominates(X[i], X[j]) or _dominates(X[j], X[i]):
            return True
    return False


def filter_dominated(pairs: list[ChoiceTask], spec: AttributeSpec | None = None) -> list[ChoiceTask]:
    """Drop tasks where one alternative weakly beats the other on every attribute.

    Idempotent and order-independent: keeps input order, removes nothing else.
    """
    return [t for t in pairs if not _pair_dominated(t, spec)]


def _canonical_order(tasks: list[ChoiceTask]) -> list[ChoiceTask]:
    return sorted(tasks, key=lambda t: tuple(sorted(t.alternatives)))


def _information_contributions(tasks: list[ChoiceTask], names: tuple[str, ...], prior: Coefficients) -> np.ndarray:
    """(n_tasks, K, K) conditional-logit information contribution of each task."""
    cols = [ATTRIBUTES.index(n) for n in names]
    b = np.array([prior.get(n, 0.0) for n in names], dtype=float)
    X = np.stack([t.attribute_matrix()[:, cols] for t in tasks])  # (n, J, K)
    P = softmax_probabilities(X @ b)  # (n, J)
    xbar = np.einsum("nj,njk->nk", P, X)
    centered = X - xbar[:, None, :]
    return np.einsum("nj,njk,njl->nkl", P, centered, centered)


def _d_error_from_info(info: np.ndarray, k: int) -> float:
    sign, logdet = np.linalg.slogdet(info)
    if sign <= 0:
        return np.inf
    return float(np.exp(-logdet / k))


def d_error(tasks: list[ChoiceTask], prior: Coefficients | None = None, spec: AttributeSpec | None = None) -> float:
    """D-error det(I^-1)^(1/K) of a task set under a conditional-logit prior."""
    names = spec.names if spec is not None else ATTRIBUTES
    M = _information_contributions(tasks, names, prior or {})
    return _d_error_from_info(M.sum(axis=0), len(names))


def _balance_penalty(counts: np.ndarray, ideal: float) -> float:
    return float(np.mean((counts - ideal) ** 2)) / max(ideal, 1.0) ** 2


def _level_count_matrix(tasks: list[ChoiceTask], spec: AttributeSpec) -> dict[str, np.ndarray]:
    out = {}
    for name in spec.names:
        col = ATTRIBUTES.index(name)
        levels = np.array(spec.attributes[name])
        values = np.concatenate([t.attribute_matrix()[:, col] for t in tasks])
        out[name] = np.array([(values == lv).sum() for lv in levels])
    return out


def select_design(
    candidates: list[ChoiceTask],
    n_tasks: int,
    prior: Coefficients | None = None,
    seed: int = 0,
    spec: AttributeSpec | None = None,
    n_restarts: int = 50,
    max_sweeps: int = 1000,
    balance_weight: float = 0.0,
    trace: list | None = None,
) -> Design:
    """Pick ``n_tasks`` candidates minimizing D-error by greedy + exchange search.

    Restart 0 seeds greedily (ridge-stabilized determinant gain); the remaining
    restarts seed with random subsets. Each restart runs pairwise-exchange
    sweeps until no swap improves the objective. Deterministic for a fixed
    seed and invariant to candidate input order (candidates are canonically
    sorted first; ties break on lexicographic task ids).

    ``trace``, when given, receives one (restart, objective) pair per accepted
    exchange; the objective never increases within a restart.
    """
    if spec is None:
        spec = table_grid_spec()
    prior = dict(prior or {})
    if n_tasks > len(candidates):
        raise InputError(f"n_tasks={n_tasks} exceeds {len(candidates)} candidates")
    if not all(np.isfinite(v) for v in prior.values()):
        raise InputError("prior must be finite")

    cands = _canonical_order(candidates)
    names = spec.names
    k = len(names)
    M = _information_contributions(cands, names, prior)
    n = len(cands)
    ids = [t.task_id for t in cands]

    level_grids = {name: np.array(spec.attributes[name]) for name in names}
    cand_levels = {
        name: np.stack([t.attribute_matrix()[:, ATTRIBUTES.index(name)] for t in cands])
        for name in names
    }  # (n, J) raw values per attribute

    def objective(member_mask: np.ndarray, info: np.ndarray) -> float:
        val = _d_error_from_info(info, k)
        if balance_weight > 0.0:
            pen = 0.0
            for name in names:
                levels = level_grids[name]
                vals = cand_levels[name][member_mask].ravel()
                counts = np.array([(vals == lv).sum() for lv in levels])
                pen += _balance_penalty(counts, len(vals) / len(levels))
            val += balance_weight * pen
        return val

    rng = np.random.default_rng(seed)
    ids_arr = np.array(ids)

    def greedy_seed() -> np.ndarray:
        ridge = 1e-9 * np.eye(k) * max(np.trace(M.sum(axis=0)) / max(n, 1), 1.0)
        chosen: list[int] = []
        info = np.zeros((k, k))
        available = list(range(n))
        for _ in range(n_tasks):
            trial = info[None, :, :] + M[available] + ridge[None, :, :]
            dets = np.linalg.det(trial)
            best = int(np.argmax(dets))
            idx = available.pop(best)
            chosen.append(idx)
            info = info + M[idx]
        mask = np.zeros(n, dtype=bool)
        mask[chosen] = True
        return mask

    best_obj = np.inf
    best_mask: np.ndarray | None = None
    best_key: tuple[str, ...] | None = None

    for restart in range(n_restarts):
        if restart == 0:
            mask = greedy_seed()
        else:
            mask = np.zeros(n, dtype=bool)
            mask[rng.choice(n, size=n_tasks, replace=False)] = True
        info = M[mask].sum(axis=0)
        obj = objective(mask, info)
        if trace is not None:
            trace.append((restart, obj))

        for _ in range(max_sweeps):
            improved = False
            for slot in np.flatnonzero(mask):
                outs = np.flatnonzero(~mask)
                if len(outs) == 0:
                    break
                base = info - M[slot]
                trial_obj = np.empty(len(outs))
                trial_infos = base[None, :, :] + M[outs]
                if balance_weight > 0.0:
                    for t, cand_in in enumerate(outs):
                        trial_mask = mask.copy()
                        trial_mask[slot] = False
                        trial_mask[cand_in] = True
                        trial_obj[t] = objective(trial_mask, trial_infos[t])
                else:
                    signs, logdets = np.linalg.slogdet(trial_infos)
                    trial_obj = np.where(signs > 0, np.exp(-logdets / k), np.inf)
                order = np.lexsort((ids_arr[outs], trial_obj))
                cand_best = order[0]
                if trial_obj[cand_best] < obj - 1e-15:
                    swap_in = outs[cand_best]
                    mask[slot] = False
                    mask[swap_in] = True
                    info = base + M[swap_in]
                    obj = trial_obj[cand_best]
                    improved = True
                    if trace is not None:
                        trace.append((restart, obj))
            if not improved:
                break

        key = tuple(sorted(ids[i] for i in np.flatnonzero(mask)))
        if obj < best_obj - 1e-15 or (abs(obj - best_obj) <= 1e-15 and (best_key is None or key < best_key)):
            best_obj = obj
            best_mask = mask.copy()
            best_key = key

    assert best_mask is not None
    selected = sorted((cands[i] for i in np.flatnonzero(best_mask)), key=lambda t: t.task_id)
    err = d_error(selected, prior, spec)
    balance = {
        name: dict(zip((float(v) for v in level_grids[name]), map(int, counts)))
        for name, counts in _level_count_matrix(selected, spec).items()
    }
    return Design(tasks=selected, d_error=err, balance_report=balance, prior=prior, spec=spec)


def audit_design(design: Design) -> dict:
    """Balance, overlap, and dominance diagnostics for a design."""
    if not design.tasks:
        raise InputError("empty design")
    spec = design.spec or table_grid_spec()
    counts = _level_count_matrix(design.tasks, spec)
    n_slots = len(design.tasks) * design.tasks[0].n_alternatives
    balance = {}
    for name, cnt in counts.items():
        ideal = n_slots / len(spec.attributes[name])
        balance[name] = {
            "counts": {float(lv): int(c) for lv, c in zip(spec.attributes[name], cnt)},
            "ideal": ideal,
            "max_deviation": float(np.max(np.abs(cnt - ideal))),
        }
    overlap = {}
    for name in spec.names:
        col = ATTRIBUTES.index(name)
        same = [len(set(t.attribute_matrix()[:, col])) == 1 for t in design.tasks]
        overlap[name] = float(np.mean(same))
    violations = [t.task_id for t in design.tasks if _pair_dominated(t, spec)]
    return {
        "n_tasks": len(design.tasks),
        "d_error": design.d_error,
        "balance": balance,
        "attribute_overlap_rate": overlap,
        "dominance_violations": violations,
    }


def design_to_dict(design: Design) -> dict:
    spec = design.spec or table_grid_spec()
    return {
        "attributes": [
            {
                "name": name,
                "unit": spec.units.get(name, ""),
                "levels": [float(v) for v in spec.attributes[name]],
                "lower_is_better": spec.lower_is_better.get(name, True),
            }
            for name in spec.names
        ],
        "tasks": [
            {
                "task_id": t.task_id,
                **({"scenario": t.scenario} if t.scenario else {}),
                "alternatives": [
                    {"wait": a.wait, "cost": a.cost, "unrel": a.unrel} for a in t.alternatives
                ],
            }
            for t in design.tasks
        ],
        "d_error": design.d_error,
        "prior": {k: float(v) for k, v in sorted(design.prior.items())},
    }


def design_from_dict(payload: dict) -> Design:
    spec = AttributeSpec(
        attributes={a["name"]: tuple(a["levels"]) for a in payload["attributes"]},
        units={a["name"]: a["unit"] for a in payload["attributes"]},
        lower_is_better={a["name"]: a["lower_is_better"] for a in payload["attributes"]},
    )
    tasks = [
        ChoiceTask(
            task_id=t["task_id"],
            scenario=t.get("scenario"),
            alternatives=tuple(
                AttributeProfile(a["wait"], a["cost"], a["unrel"]) for a in t["alternatives"]
            ),
        )
        for t in payload["tasks"]
    ]
    balance = {
        name: dict(zip((float(v) for v in spec.attributes[name]), map(int, counts)))
        for name, counts in _level_count_matrix(tasks, spec).items()
    }
    return Design(
        tasks=tasks,
        d_error=float(payload["d_error"]),
        balance_report=balance,
        prior=dict(payload.get("prior", {})),
        spec=spec,
    )


def save_design(design: Design, path) -> None:
    """Write design.json; serialization is canonical so round-trips are bit-exact."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(design_to_dict(design), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_design(path) -> Design:
    with open(path, encoding="utf-8") as fh:
        return design_from_dict(json.load(fh))
