"""Additive regression of a transformed response under right censoring.

Kaplan-Meier weighted kernel regression, marginal integration of the fitted
surface into additive components, and normal confidence bands.
"""

from .additive import (
    AdditiveFit,
    EvaluationDomain,
    IntegrationDensity,
    QuadratureSpec,
    additive_predict,
    bump_density,
    default_domain,
    fit_components,
    marginal_component,
    true_component_oracle,
    uniform_density,
)
from .density import DensityModel, bandwidth_h1, fit_kde, marginal_kde
from .inference import (
    bias_oracle,
    h_plugin,
    mse_expansion,
    normal_ci,
    sigma_plugin,
    standardized_stat,
    undersmoothed_bandwidth,
)
from .kernels import Kernel1D, ProductKernel, construct_higher_order, epanechnikov, kernel_moment, uniform
from .pipeline import FitSettings, fit_additive
from .psi import PsiSpec
from .regression import RegressionSurface, bandwidth_h2, fit_surface, weighted_estimator
from .simulate import DgpSpec, StudyConfig, StudyResult, generate, paper_dgp, reproduce_figure, run_study
from .survival import CensoredSample, StepSurvival, fit_censoring_survival, ipcw_response

__version__ = "0.1.0"
