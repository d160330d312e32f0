"""Structural equation modeling for jump diffusions observed at high frequency.

Simulate latent-factor jump-diffusion panels, estimate the volatility
structure by threshold-filtered quasi-maximum likelihood, and test model fit
with a quasi-likelihood-ratio statistic.
"""

from .errors import (
    ConfigError,
    DataFormatError,
    DfNonPositive,
    JumpsemError,
    NoFeasibleStart,
    NotPositiveDefinite,
    RankDeficient,
    SingularPsi,
)
from .gof import TestResult, chi2_cdf, chi2_quantile, decide, lr_statistic
from .matrices import chol_logdet_inv, duplication, sandwich_cov, unvech, vech
from .model import (
    Fixed,
    Free,
    ModelSpec,
    implied_covariance,
    jacobian,
    materialize,
    model_spec_from_json,
    model_spec_from_obj,
    rank_check,
)
from .montecarlo import McConfig, McSummary, ks_distance, run, write_per_rep_csv, write_summary
from .qmle import FitOptions, QmleResult, fit, gradient, quasi_loglik, theta_se
from .simulate import (
    GaussianJumps,
    JumpChannel,
    LatentSystemSpec,
    ObservationSet,
    OUJumpSpec,
    assemble_observations,
    read_observations,
    simulate_latent,
    simulate_panel,
    write_observations,
)
from .threshold import CovEstimate, ThresholdConfig, estimate, retained_mask

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CovEstimate",
    "DataFormatError",
    "DfNonPositive",
    "FitOptions",
    "Fixed",
    "Free",
    "GaussianJumps",
    "JumpChannel",
    "JumpsemError",
    "LatentSystemSpec",
    "McConfig",
    "McSummary",
    "ModelSpec",
    "NoFeasibleStart",
    "NotPositiveDefinite",
    "ObservationSet",
    "OUJumpSpec",
    "QmleResult",
    "RankDeficient",
    "SingularPsi",
    "TestResult",
    "ThresholdConfig",
    "assemble_observations",
    "chi2_cdf",
    "chi2_quantile",
    "chol_logdet_inv",
    "decide",
    "duplication",
    "estimate",
    "fit",
    "gradient",
    "implied_covariance",
    "jacobian",
    "ks_distance",
    "lr_statistic",
    "materialize",
    "model_spec_from_json",
    "model_spec_from_obj",
    "quasi_loglik",
    "rank_check",
    "read_observations",
    "retained_mask",
    "run",
    "sandwich_cov",
    "simulate_latent",
    "simulate_panel",
    "theta_se",
    "unvech",
    "vech",
    "write_observations",
    "write_per_rep_csv",
    "write_summary",
]
