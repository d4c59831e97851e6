"""Generalized t-distribution on the cylinder.

Density, normalizing constants, modes and moments, exact sampling, maximum
likelihood fitting of the full model and its submodels, and a bivariate
Kolmogorov-Smirnov goodness-of-fit statistic.
"""

__version__ = "0.1.0"

from .analysis import (
    ModeSet,
    TrigMoments,
    circular_linear_correlation,
    cross_moment,
    find_modes,
    regression_mean,
    regression_variance,
    skewness_x,
    sub1_moment_closed_form,
    trig_moment,
)
from .dataset import Dataset, ParseError, read_csv, write_csv
from .exceptions import (
    BoundaryWarning,
    ConstraintError,
    ConvergenceError,
    CyltError,
    DomainError,
    DomainWarning,
    PreconditionError,
    SamplingError,
)
from .fit import FitOptions, FitReport, fit_mle, loglik
from .gof import GOF_CRITICAL_VALUES, gof_ks
from .model import (
    CylinderParams,
    KSParams,
    TrivariateTSpec,
    derive_from_trivariate,
    log_normalizing_constant,
    log_pdf,
    normalizing_constant,
    pdf,
)
from .sample import (
    SamplerConfig,
    acceptance_rate,
    sample_joint,
    sample_theta,
    sample_x_given_theta,
)
from .specfun import SeriesOptions

__all__ = [
    "BoundaryWarning",
    "ConstraintError",
    "ConvergenceError",
    "CylinderParams",
    "CyltError",
    "Dataset",
    "DomainError",
    "DomainWarning",
    "FitOptions",
    "FitReport",
    "GOF_CRITICAL_VALUES",
    "KSParams",
    "ModeSet",
    "ParseError",
    "PreconditionError",
    "SamplerConfig",
    "SamplingError",
    "SeriesOptions",
    "TrigMoments",
    "TrivariateTSpec",
    "acceptance_rate",
    "circular_linear_correlation",
    "cross_moment",
    "derive_from_trivariate",
    "find_modes",
    "fit_mle",
    "gof_ks",
    "log_normalizing_constant",
    "log_pdf",
    "loglik",
    "normalizing_constant",
    "pdf",
    "read_csv",
    "regression_mean",
    "regression_variance",
    "sample_joint",
    "sample_theta",
    "sample_x_given_theta",
    "skewness_x",
    "sub1_moment_closed_form",
    "trig_moment",
    "write_csv",
]
