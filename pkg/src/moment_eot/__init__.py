"""Extended object tracking with image moments and random hypersurfaces."""

from .geometry import (
    EllipseShape,
    ExtendedState,
    GeometryError,
    MomentVector,
    area,
    contains,
    ellipse_to_moments,
    implicit_value,
    moments_to_ellipse,
    project_moments,
)
from .imm import ImmTracker, LikelihoodReport, ModeSet, MotionModel, UkfTracker, imm_mix, imm_step, model_likelihood
from .measurement import NoiseSpec, noise_poly_moments, pseudo_measurement
from .metrics import MetricsReport, RunResult, iou, rmse
from .ukf import FilterError, GaussianBelief, UtParams, sigma_points, ukf_update_scan, unscented_transform

__all__ = [
    "EllipseShape",
    "ExtendedState",
    "FilterError",
    "GaussianBelief",
    "GeometryError",
    "ImmTracker",
    "LikelihoodReport",
    "MetricsReport",
    "ModeSet",
    "MomentVector",
    "MotionModel",
    "NoiseSpec",
    "RunResult",
    "UkfTracker",
    "UtParams",
    "area",
    "contains",
    "ellipse_to_moments",
    "imm_mix",
    "imm_step",
    "implicit_value",
    "iou",
    "model_likelihood",
    "moments_to_ellipse",
    "noise_poly_moments",
    "project_moments",
    "pseudo_measurement",
    "rmse",
    "sigma_points",
    "ukf_update_scan",
    "unscented_transform",
]
