"""Stated-preference toolkit: choice-experiment design, response collection,
discrete choice estimation, and time-value welfare analysis."""

from .access import (
    SBDC_COMPENSATION_LEVELS,
    SbdcConfig,
    SbdcDataset,
    SbdcFit,
    SbdcObservation,
    fit_sbdc,
    wtac_individual,
    wtac_median,
)
from .attributes import (
    DrawConfig,
    FitConfig,
    GmnlConfig,
    GmnlParameters,
    WtpEntry,
    WtpReport,
    compute_wtp,
    fit_clogit,
    fit_gmnl,
)
from .core import (
    ATTRIBUTES,
    AttributeProfile,
    ChoiceTask,
    Coefficients,
    Dataset,
    FitResult,
    Observation,
    choice_probabilities,
    log_likelihood,
    utility,
)
from .design import (
    AttributeSpec,
    Design,
    audit_design,
    d_error,
    enumerate_pairs,
    filter_dominated,
    load_design,
    save_design,
    select_design,
    table_grid_spec,
)
from .errors import (
    ChoicevalError,
    ConfigError,
    DomainError,
    IdentificationError,
    InputError,
    NonConvergenceError,
    NumericError,
    RankError,
    SeparationError,
)
from .latent import LatentClassFit, LcConfig, fit_latent_class, information_criteria, posterior_class_probs
from .synth import (
    ClTruth,
    GmnlTruth,
    LatentClassTruth,
    SbdcTruth,
    TruthSpec,
    brute_force_loglik,
    load_truth,
    save_truth,
    simulate_sbdc,
    simulate_sce,
)
from .welfare import (
    IncomeGroup,
    WelfareReport,
    default_groups,
    pricing_headroom,
    spt_table,
    welfare_change,
)

__version__ = "0.1.0"
