"""Sequential Gaussian-process posterior sampling."""

from ._core import (
    InputSet,
    InvalidInput,
    KernelParams,
    NumericalError,
    RegressionDataset,
    RunConfig,
    band_coverage,
    cli,
    conditional_prior,
    default_config,
    effective_sample_size,
    full_gibbs_baseline,
    gauss_loglik,
    generate_regression,
    gram_matrix,
    moment_match,
    price_flat,
    run_sequence,
    softplus,
    ssg_forward,
    ssg_inverse,
)

__all__ = [
    "InputSet",
    "InvalidInput",
    "KernelParams",
    "NumericalError",
    "RegressionDataset",
    "RunConfig",
    "band_coverage",
    "cli",
    "conditional_prior",
    "default_config",
    "effective_sample_size",
    "full_gibbs_baseline",
    "gauss_loglik",
    "generate_regression",
    "gram_matrix",
    "moment_match",
    "price_flat",
    "run_sequence",
    "softplus",
    "ssg_forward",
    "ssg_inverse",
]
