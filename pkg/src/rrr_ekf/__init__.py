"""Adaptive augmented-state EKF with recursive noise-statistics tuning."""
from .aircraft import CaseId, ModelConstants, builtin_model
from .diagnostics import (EstimationReport, autocorrelation, correlation_matrix, crb_percent,
                          weak_parameter_screen)
from .ekf import FilterTrajectory, ekf_forward, residue_series, rts_smooth
from .errors import (ChannelRangeError, ConfigError, ConstantsError, DatasetError,
                     DegenerateInputError, DivergenceError, EmptyDataError, EstimationError,
                     NumericError)
from .io import RunConfig, read_dataset, read_run_config, write_dataset, write_report
from .kernels import COMPILED_AVAILABLE, default_backend
from .simulator import SimConfig, doublet_input, simulate_dataset
from .statespace import (AugmentedState, ChannelSeries, FlightData, ModelDefinition,
                         interpolate_channel, numeric_jacobian, rk4_step)
from .tuning import (CostVector, NoiseStatistics, RecipeConfig, compute_costs, estimate,
                     reference_recipe, run_recipe)

__version__ = "0.1.0"

__all__ = [
    "CaseId", "ModelConstants", "builtin_model",
    "EstimationReport", "autocorrelation", "correlation_matrix", "crb_percent",
    "weak_parameter_screen",
    "FilterTrajectory", "ekf_forward", "residue_series", "rts_smooth",
    "ChannelRangeError", "ConfigError", "ConstantsError", "DatasetError", "DegenerateInputError",
    "DivergenceError", "EmptyDataError", "EstimationError", "NumericError",
    "RunConfig", "read_dataset", "read_run_config", "write_dataset", "write_report",
    "COMPILED_AVAILABLE", "default_backend",
    "SimConfig", "doublet_input", "simulate_dataset",
    "AugmentedState", "ChannelSeries", "FlightData", "ModelDefinition", "interpolate_channel",
    "numeric_jacobian", "rk4_step",
    "CostVector", "NoiseStatistics", "RecipeConfig", "compute_costs", "estimate",
    "reference_recipe", "run_recipe",
]
