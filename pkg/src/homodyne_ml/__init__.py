"""Homodyne characterization of absorbing/amplifying optical media.

Simulate random-phase homodyne data from a coherent probe sent through a
linear medium with absorption rate ``g1`` and amplification rate ``g2``, and
recover ``(g1, g2)`` by maximum likelihood.
"""
from ._backend import NAME as BACKEND
from .channel_model import (
    ChannelConfig,
    DerivedChannel,
    Gains,
    ProbeState,
    derive_channel,
    gains_from_atoms,
    invert_channel,
    output_wigner,
    propagation_gain,
)
from .estimator import (
    FitOptions,
    FitResult,
    fisher_errors,
    grid_search_oracle,
    log_likelihood,
    mle_fit,
    moment_init,
)
from .harness import ExperimentConfig, Sweep, fit_power_law, run_eta_sweep, run_n_scaling, run_table
from .homodyne import (
    Dataset,
    homodyne_logpdf,
    homodyne_pdf,
    read_dataset_csv,
    sample_dataset,
    total_variance_param,
    wigner_marginal_numeric,
    write_dataset_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ChannelConfig", "DerivedChannel", "Gains", "ProbeState",
    "derive_channel", "gains_from_atoms", "invert_channel", "output_wigner", "propagation_gain",
    "FitOptions", "FitResult", "fisher_errors", "grid_search_oracle", "log_likelihood",
    "mle_fit", "moment_init",
    "ExperimentConfig", "Sweep", "fit_power_law", "run_eta_sweep", "run_n_scaling", "run_table",
    "Dataset", "homodyne_logpdf", "homodyne_pdf", "read_dataset_csv", "sample_dataset",
    "total_variance_param", "wigner_marginal_numeric", "write_dataset_csv",
]
