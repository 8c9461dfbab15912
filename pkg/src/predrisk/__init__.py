"""Objective-Bayes predictive distributions with a KL-risk benchmark harness.

The library implements the worst-case-optimal (right-invariant-prior)
posterior predictive for the multivariate normal family and for
fixed-lengthscale RBF Gaussian-process regression, together with the
standard objective-Bayes and plug-in alternatives, the triangular and
scale-shift symmetry groups behind them, and a reproducible Monte Carlo
engine for estimating predictive (Kullback-Leibler) risk.
"""

from .distributions import (
    MvnParams,
    ObservationSet,
    SampleStats,
    StudentTParams,
    mvn_logpdf,
    mvt_logpdf,
    sample_mvn,
    sample_stats,
)
from .exceptions import (
    ConfigError,
    DegenerateObservation,
    DimensionMismatch,
    InvalidSpec,
    NotPositiveDefinite,
    QuadratureNotConverged,
    RankDeficientFeatures,
    SingularGram,
    SingularKernel,
    TooManyUndefined,
)
from .gp import (
    GaussianProcessTPredictor,
    GpAMatrix,
    GpDesign,
    GpParams,
    GpPluginPredictor,
    build_a_matrix,
    conditional_normal,
    entropy_improvement,
    gls_fit,
    load_design,
    projector_matrix,
    rbf_kernel,
    t_predictive,
)
from .groups import (
    GpGroupElement,
    GroupElementN,
    gn_act_data,
    gn_act_params,
    gn_compose,
    gn_inverse,
    gn_right_haar_logdensity,
    gp_act_outputs,
    gp_act_params,
    gp_compose,
    gp_inverse,
    gp_right_haar_logdensity,
)
from .linalg import cholesky_upper, gram_logdet
from .mvn import (
    MVN_KINDS,
    MvnPredictor,
    PredictiveEvaluation,
    kind_well_defined,
    predictive_logdensity,
    predictive_logdensity_from_stats,
    qr_normalization_check,
    qr_total_mass,
    qr_unnormalized_logdensity,
)
from .rng import RandomStream
from .risk import (
    ExperimentSpec,
    GpExperiment,
    MvnExperiment,
    RiskEstimate,
    estimate_risk,
    estimate_risk_table,
    oracle_logscore,
    risk_constancy_report,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateObservation",
    "DimensionMismatch",
    "ExperimentSpec",
    "GaussianProcessTPredictor",
    "GpAMatrix",
    "GpDesign",
    "GpExperiment",
    "GpGroupElement",
    "GpParams",
    "GpPluginPredictor",
    "GroupElementN",
    "InvalidSpec",
    "MVN_KINDS",
    "MvnExperiment",
    "MvnParams",
    "MvnPredictor",
    "NotPositiveDefinite",
    "ObservationSet",
    "PredictiveEvaluation",
    "QuadratureNotConverged",
    "RandomStream",
    "RankDeficientFeatures",
    "RiskEstimate",
    "SampleStats",
    "SingularGram",
    "SingularKernel",
    "StudentTParams",
    "TooManyUndefined",
    "build_a_matrix",
    "cholesky_upper",
    "conditional_normal",
    "entropy_improvement",
    "estimate_risk",
    "estimate_risk_table",
    "gls_fit",
    "gn_act_data",
    "gn_act_params",
    "gn_compose",
    "gn_inverse",
    "gn_right_haar_logdensity",
    "gp_act_outputs",
    "gp_act_params",
    "gp_compose",
    "gp_inverse",
    "gp_right_haar_logdensity",
    "gram_logdet",
    "kind_well_defined",
    "load_design",
    "mvn_logpdf",
    "mvt_logpdf",
    "oracle_logscore",
    "predictive_logdensity",
    "predictive_logdensity_from_stats",
    "projector_matrix",
    "qr_normalization_check",
    "qr_total_mass",
    "qr_unnormalized_logdensity",
    "rbf_kernel",
    "risk_constancy_report",
    "sample_mvn",
    "sample_stats",
    "t_predictive",
]
