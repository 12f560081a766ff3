"""Simulation and inference for the alpha-Wiener bridge."""

from .errors import (
    BridgeError,
    DegenerateEstimateError,
    DegeneratePathError,
    DomainError,
    NumericalError,
    SpecError,
    StepSizeError,
)
from .model import (
    BridgeParams,
    SamplePath,
    TimeGrid,
    covariance,
    limit_variance,
    lil_envelope,
    rescaled_qv,
    transition_moments,
    variance,
)
from .samplers import (
    SeedSpec,
    euler_variance,
    geometric_grid,
    sample_euler,
    sample_exact,
    sample_joint,
    uniform_grid,
)
from .estimators import (
    EstimateReport,
    classify_alpha,
    energy_integral,
    estimate,
    hellinger_half,
    log_likelihood_ratio,
    mle_alpha,
    qv_sigma2,
    stoch_integral_closed_form,
)
from .path_stats import WindowSpec, envelope_ratio, rescaled_terminal, sign_split, terminal_sup
from .experiments import ExperimentSpec, ExperimentSummary, persist_summary, run_experiment

__version__ = "0.1.0"
