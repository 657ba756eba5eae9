"""Set-membership conjugate-gradient LCMV beamforming with baselines and a
Monte-Carlo simulation harness."""

from .array import (
    ArrayGeometry,
    ScenarioConfig,
    ScenarioError,
    Snapshot,
    SourceSpec,
    interference_plus_noise_covariance,
    next_snapshot,
    optimal_weights,
    sinr,
    steering_vector,
    true_covariance,
)
from .core import BeamformerState, CgParams, Lambda1Terms, PdbParams, initialize, step
from .harness import CurveSummary, TrialResult, run_monte_carlo, run_trial

__version__ = "0.1.0"
