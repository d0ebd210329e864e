"""Domain types and the random-utility logit kernels every estimator builds on.

Utilities are linear in the three service attributes (waiting time in minutes,
cost in yuan, unreliability band half-width in minutes), carried in raw units.
Choice probabilities are softmax over alternatives with log-sum-exp
stabilization; probabilities are floored at 1e-300 before logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, NumericError

# Canonical attribute order used by every design matrix in the package.
ATTRIBUTES = ("wait", "cost", "unrel")

# Attribute level grids used in replication mode.
REPLICATION_LEVELS = {
    "wait": (30.0, 60.0, 90.0),
    "cost": (50.0, 100.0, 150.0),
    "unrel": (5.0, 10.0, 15.0),
}

SCENARIOS = ("work", "home")

PROB_FLOOR = 1e-300

#: named map attribute -> coefficient; estimators may add model-specific keys
Coefficients = dict[str, float]


@dataclass(frozen=True, order=True)
class AttributeProfile:
    """One delivery alternative: waiting time (min), cost (yuan), unreliability (±min)."""

    wait: float
    cost: float
    unrel: float

    def __post_init__(self):
        if not (self.wait > 0 and self.cost > 0 and self.unrel > 0):
            raise InputError(f"attribute values must be strictly positive, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.wait, self.cost, self.unrel], dtype=float)

    def in_replication_grid(self) -> bool:
        return all(
            getattr(self, a) in REPLICATION_LEVELS[a] for a in ATTRIBUTES
        )


@dataclass(frozen=True)
class ChoiceTask:
    """A two-alternative (in general J-alternative) choice situation.

    ``scenario`` is None for design-universe tasks and must be set ("work" or
    "home") before the task enters an estimation dataset.
    """

    task_id: str
    alternatives: tuple[AttributeProfile, ...]
    scenario: str | None = None

    def __post_init__(self):
        if len(self.alternatives) < 2:
            raise InputError(f"task {self.task_id}: needs at least 2 alternatives")
        if len(set(self.alternatives)) != len(self.alternatives):
            raise InputError(f"task {self.task_id}: alternatives must be distinct")
        if self.scenario is not None and self.scenario not in SCENARIOS:
            raise InputError(f"task {self.task_id}: unknown scenario {self.scenario!r}")

    @property
    def n_alternatives(self) -> int:
        return len(self.alternatives)

    def attribute_matrix(self) -> np.ndarray:
        """(J, 3) matrix of alternative attributes in canonical order."""
        return np.stack([a.as_array() for a in self.alternatives])


@dataclass(frozen=True)
class Observation:
    """One recorded choice: which alternative a respondent picked in a task."""

    respondent_id: str
    task: ChoiceTask
    chosen_index: int

    def __post_init__(self):
        if not 0 <= self.chosen_index < self.task.n_alternatives:
            raise InputError(
                f"respondent {self.respondent_id}, task {self.task.task_id}: "
                f"chosen_index {self.chosen_index} out of range"
            )


@dataclass
class Dataset:
    """Long-format panel of respondents x tasks, plus per-respondent covariates."""

    observations: list[Observation]
    covariates: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        for obs in self.observations:
            if obs.task.scenario is None:
                raise InputError(
                    f"task {obs.task.task_id}: estimation data requires a scenario tag"
                )
            if obs.respondent_id not in self.covariates:
                self.covariates[obs.respondent_id] = {}

    @property
    def respondent_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for obs in self.observations:
            seen.setdefault(obs.respondent_id, None)
        return list(seen)

    @property
    def n_respondents(self) -> int:
        return len(self.respondent_ids)

    def subset_scenario(self, scenario: str) -> "Dataset":
        if scenario not in SCENARIOS:
            raise InputError(f"unknown scenario {scenario!r}")
        obs = [o for o in self.observations if o.task.scenario == scenario]
        ids = {o.respondent_id for o in obs}
        return Dataset(obs, {r: dict(c) for r, c in self.covariates.items() if r in ids})


@dataclass(frozen=True)
class FitResult:
    """Estimates from one model fit.

    ``se`` are the default-reported standard errors (cluster-robust by
    respondent where a panel structure exists). ``cov`` is the covariance
    matrix backing ``se``, ordered like ``param_names``.
    """

    model: str
    coefficients: Coefficients
    se: dict[str, float]
    cov: np.ndarray
    param_names: tuple[str, ...]
    llf: float
    n_obs: int
    n_respondents: int
    converged: bool
    n_iter: int
    classical_se: dict[str, float] | None = None
    extra: dict = field(default_factory=dict)


def _require_attributes(beta: Coefficients) -> np.ndarray:
    try:
        return np.array([beta[a] for a in ATTRIBUTES], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"missing coefficient for attribute {exc.args[0]!r}") from None


def utility(profile: AttributeProfile, beta: Coefficients) -> float:
    """Linear utility index of one alternative: beta . (wait, cost, unrel)."""
    b = _require_attributes(beta)
    return float(b @ profile.as_array())


def softmax_probabilities(utilities: np.ndarray) -> np.ndarray:
    """Softmax along the last axis with log-sum-exp stabilization."""
    u = np.asarray(utilities, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NumericError("non-finite utility")
    shifted = u - u.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def choice_probabilities(task: ChoiceTask, beta: Coefficients) -> np.ndarray:
    """Probability of each alternative in ``task`` under coefficients ``beta``."""
    b = _require_attributes(beta)
    return softmax_probabilities(task.attribute_matrix() @ b)


def dataset_arrays(data: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a dataset into estimation arrays.

    Returns ``(X, chosen, resp_index)`` where ``X`` is (n_obs, J, 3), ``chosen``
    the chosen alternative index per observation, and ``resp_index`` maps each
    observation to a dense respondent index (observations are kept in input
    order; all tasks must share the same alternative count).
    """
    if not data.observations:
        raise InputError("empty dataset")
    n_alts = {o.task.n_alternatives for o in data.observations}
    if len(n_alts) != 1:
        raise InputError(f"mixed alternative counts in dataset: {sorted(n_alts)}")
    ids = data.respondent_ids
    id_index = {r: i for i, r in enumerate(ids)}
    X = np.stack([o.task.attribute_matrix() for o in data.observations])
    chosen = np.array([o.chosen_index for o in data.observations], dtype=np.intp)
    resp = np.array([id_index[o.respondent_id] for o in data.observations], dtype=np.intp)
    return X, chosen, resp


def loglik_from_utilities(U: np.ndarray, chosen: np.ndarray) -> tuple[float, np.ndarray]:
    """Log-likelihood contributions and probabilities from a utility array.

    ``U`` is (n_obs, J); returns (sum of log chosen-probabilities, (n_obs, J)
    probability matrix).
    """
    P = softmax_probabilities(U)
    p_chosen = np.maximum(P[np.arange(len(chosen)), chosen], PROB_FLOOR)
    return float(np.sum(np.log(p_chosen))), P


def log_likelihood(data: Dataset, beta: Coefficients) -> tuple[float, Coefficients]:
    """Conditional-logit log-likelihood and its analytic gradient.

    The gradient of each coefficient is the summed difference between the
    chosen alternative's attribute and the probability-weighted attribute
    mean within each task. Reductions use numpy pairwise summation, so the
    value is deterministic for identical inputs.
    """
    b = _require_attributes(beta)
    X, chosen, _ = dataset_arrays(data)
    U = X @ b
    value, P = loglik_from_utilities(U, chosen)
    x_chosen = X[np.arange(len(chosen)), chosen, :]
    x_mean = np.einsum("oj,ojk->ok", P, X)
    grad = (x_chosen - x_mean).sum(axis=0)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericError("non-finite log-likelihood")
    return value, dict(zip(ATTRIBUTES, grad.tolist()))
