"""Sharpness-aware optimization lab: SAM, vSAM and their diagnostics."""

from ._core import (
    ConfigError,
    ContractError,
    Error,
    NumericError,
    Objective,
    change_rate_series,
    compute_ais,
    generate_dataset,
    grad,
    init_params,
    psf_bound_check,
    loss,
    mlp,
    next_budget,
    perturbation,
    quadratic,
    rosenbrock,
    run_experiment,
    sam_gradient,
    selfcheck,
    sharp_flat,
    sliced_variance,
    symmetric_eigen,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
