"""Mismatch-aware rate-distortion allocation for Gaussian CSI compression.

Synthesizes wideband MIMO-OFDM channel covariances, computes pilot-based
MMSE posteriors, injects decoder-side eigenvalue mismatch, solves robust
reverse water-filling allocations, and evaluates the resulting distortion
analytically and by Monte Carlo.
"""

__version__ = "0.1.0"

from .allocation import (
    Allocation,
    ConvergenceError,
    asrwf,
    mode_rate,
    rrwf,
    rwf,
    solve_mode_kkt,
    uniform_alloc,
)
from .covariance import (
    ChannelCovariance,
    MultipathParams,
    sample_multipath_params,
    steering_vector,
    delay_vector,
    synth_covariance,
    validate_covariance,
)
from .distortion import (
    DistortionReport,
    distortion_matrix,
    evaluate_allocation,
    mode_distortion,
    rate_matrix,
)
from .pilots import PilotConfig, PosteriorModel, build_pilot_matrix, mmse_estimate, mmse_posterior
from .spectrum import (
    MismatchSpec,
    SpectrumPair,
    eigendecompose,
    inject_mismatch,
    truncate_rank,
)

__all__ = [
    "__version__",
    "Allocation",
    "ChannelCovariance",
    "ConvergenceError",
    "DistortionReport",
    "MismatchSpec",
    "MultipathParams",
    "PilotConfig",
    "PosteriorModel",
    "SpectrumPair",
    "asrwf",
    "build_pilot_matrix",
    "delay_vector",
    "distortion_matrix",
    "eigendecompose",
    "evaluate_allocation",
    "inject_mismatch",
    "mmse_estimate",
    "mmse_posterior",
    "mode_distortion",
    "mode_rate",
    "rate_matrix",
    "rrwf",
    "rwf",
    "sample_multipath_params",
    "solve_mode_kkt",
    "steering_vector",
    "synth_covariance",
    "truncate_rank",
    "uniform_alloc",
    "validate_covariance",
]
