"""Transient heat conduction in a ground slab with Bayesian estimation of
the thermal conductivity, volumetric heat capacity and time-varying surface
heat transfer coefficient from buried temperature sensors."""

from .domain import (
    MaterialParams,
    MeasurementSet,
    ParameterLayout,
    ParameterVector,
    PhysicalProblem,
    PiecewiseLinearProfile,
    ReferenceScales,
    SurfaceCoefficient,
    TimeSeries,
    build_uniform_partition,
    evaluate_surface_coefficient,
)
from .forward import (
    DimensionlessProblem,
    ForwardOperator,
    SolverFailure,
    SolverSettings,
    TemperatureField,
    default_settings,
    nondimensionalize,
    predict_at_sensors,
    solve_forward,
)
from .inference import (
    Chain,
    GaussianPrior,
    HeatPosterior,
    MHConfig,
    SmoothnessPrior,
    acceptance_probability,
    case_ab_posterior,
    case_c_posterior,
    log_gaussian_prior,
    log_likelihood,
    log_rayleigh,
    log_smoothness_prior,
    propose,
    run_chain,
)
from .sensitivity import SensitivityMatrix, central_difference_sensitivities, sensitivities

__version__ = "0.1.0"
