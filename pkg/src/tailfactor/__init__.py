"""Additive factor models for multivariate extremes.

Simulation, likelihood fitting and diagnostics for block-maxima and
peaks-over-threshold workflows under a family of asymmetric tail
dependence models (Husler-Reiss, Marshall-Olkin, skewed and gated
extensions).
"""

from .errors import TailFactorError
from .kernels import (
    CdfResult,
    CorrelationMatrix,
    FactorLaw,
    GevParams,
    bvn_cdf,
    esn_cdf,
    esn_logpdf,
    factor_quantile,
    gev_cdf,
    gev_pdf,
    gev_quantile,
    mvn_cdf,
    mvn_orthant,
    std_normal_cdf,
    std_normal_pdf,
)
from .models import (
    EquiGate,
    EsnHuslerReiss,
    HuslerReiss,
    MarshallOlkin,
    SharedGate,
    SkewHuslerReiss,
    boundary_mass,
    chi_u,
    ev_copula_cdf,
    ev_copula_pdf2,
    extremal_coefficient,
    margin,
    mev_cdf,
    mev_pdf2,
    mgpd_cdf,
    mgpd_pdf,
    pickands,
    singular_components,
    stdf,
    stdf_partial,
)
from .simulate import (
    FactorSpec,
    SampleMatrix,
    block_maxima,
    pot_extract,
    sample_factor,
    spec_for_model,
    to_uniform,
    to_unit_frechet,
    to_unit_pareto,
)
from .inference import (
    FitConfig,
    FitReport,
    SpatialParam,
    build_model,
    fit,
    information_criteria,
    lr_test,
    mgpd_loglik_eps,
    mgpd_loglik_full,
    pairwise_loglik_bm,
    parametric_bootstrap,
    triplewise_loglik_bm,
    two_step_fit,
)
from .diagnostics import (
    PickandsCurve,
    model_pickands,
    pair_sets_by_distance,
    pickands_cfg,
    rmse_aggregate,
    rmse_curve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
