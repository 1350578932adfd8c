"""Coherent-structure lifespans from patch-local Ulam transfer operators.

The hot integration kernels come from a compiled extension when it was
built and from a numpy fallback otherwise; see :mod:`localulam.kernels`.
"""
from .errors import (ConfigError, DataError, EmptyPatchError, LocalUlamError, NumericalError,
                     TotalEscapeError)
from .fields import (AnalyticDoubleWell, FieldError, FunctionField, GriddedField, dwp_velocity,
                     forcing_a, load_gridded_field, sample_gridded, save_gridded_field)
from .flow import FlowSpec, advect_points, rk4_flow
from .geometry import Domain, Grid, Patch, bin_of, bins_in_patch, build_grid, seed_points
from .kernels import BACKEND, available_backends
from .lifespans import (CharacteristicLifespans, Lifespan, Thresholds, characteristic_lifespans,
                        detect_lifespans, equivariance_mismatch, mismatch_paths)
from .pipeline import AnalysisConfig, generate_dwp_dataset, load_config, run_analysis
from .regularity import (interpolate_to_corners, isoperimetric_best, multilevel_contours,
                         regularize_lifespans, select_cells)
from .render import render_vector
from .tracking import (TrackedPaths, pushforward_compare, quasi_norm, select_p, track_modes)
from .ulam import (ModeWindow, TransitionCache, TransitionMatrix, build_window, build_windows,
                   compose, step_matrix, truncated_svd)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "AnalyticDoubleWell", "BACKEND", "CharacteristicLifespans", "ConfigError",
    "DataError", "Domain", "EmptyPatchError", "FieldError", "FlowSpec", "FunctionField", "Grid",
    "GriddedField", "Lifespan", "LocalUlamError", "ModeWindow", "NumericalError", "Patch",
    "Thresholds", "TotalEscapeError", "TrackedPaths", "TransitionCache", "TransitionMatrix",
    "advect_points", "available_backends", "bin_of", "bins_in_patch", "build_grid",
    "build_window", "build_windows", "characteristic_lifespans", "compose", "detect_lifespans",
    "dwp_velocity", "equivariance_mismatch", "forcing_a", "generate_dwp_dataset",
    "interpolate_to_corners", "isoperimetric_best", "load_config", "load_gridded_field",
    "mismatch_paths", "multilevel_contours", "pushforward_compare", "quasi_norm",
    "regularize_lifespans", "render_vector", "rk4_flow", "run_analysis", "sample_gridded",
    "save_gridded_field", "seed_points", "select_cells", "select_p", "step_matrix",
    "track_modes", "truncated_svd",
]
