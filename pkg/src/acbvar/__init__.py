"""Bayesian vector autoregressions with equation-wise normal-inverse-gamma priors."""

from .conjugate import (
    FACTORIZATIONS,
    NumericalError,
    compute_posterior,
    log_marginal_likelihood,
    posterior_equation,
    sample_posterior,
    structural_to_reduced,
)
from .data_io import DataError, Dataset, ScaleVector, ar4_scales, build_blocks, load_csv, write_csv
from .hyper import LogMLObjective, hyper_posterior_grid, logml_objective, optimize_hyperparameters
from .prior import (
    NIGParams,
    PriorSpec,
    ShrinkageConfig,
    assemble_prior,
    error_prior_from_iw,
    general_iw_to_nig,
    minnesota_v_beta,
    reduced_to_structural,
    udl_factorize,
)
from .sign import (
    SignRestrictionError,
    SignRestrictionSet,
    impulse_responses,
    load_restrictions,
    percentile_bands,
    sign_restricted_irfs,
)
from .simulate import simulate_var

__version__ = "0.1.0"

__all__ = [
    "FACTORIZATIONS", "NumericalError", "compute_posterior", "log_marginal_likelihood",
    "posterior_equation", "sample_posterior", "structural_to_reduced",
    "DataError", "Dataset", "ScaleVector", "ar4_scales", "build_blocks", "load_csv", "write_csv",
    "LogMLObjective", "hyper_posterior_grid", "logml_objective", "optimize_hyperparameters",
    "NIGParams", "PriorSpec", "ShrinkageConfig", "assemble_prior", "error_prior_from_iw",
    "general_iw_to_nig", "minnesota_v_beta", "reduced_to_structural", "udl_factorize",
    "SignRestrictionError", "SignRestrictionSet", "impulse_responses", "load_restrictions",
    "percentile_bands", "sign_restricted_irfs", "simulate_var",
]
