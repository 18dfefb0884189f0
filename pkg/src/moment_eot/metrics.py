"""Intersection over union and Monte Carlo RMSE aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon
from shapely.geometry.base import BaseGeometry

from .geometry import EllipseShape, ExtendedState

IOU_VERTICES = 720


def region_polygon(region, n_vertices: int = IOU_VERTICES) -> BaseGeometry:
    """Shapely geometry of an :class:`EllipseShape` or an existing polygonal region."""
    if isinstance(region, EllipseShape):
        return Polygon(region.boundary(n_vertices))
    if isinstance(region, ExtendedState):
        return Polygon(region.ellipse().boundary(n_vertices))
    if isinstance(region, BaseGeometry):
        return region
    return Polygon(np.asarray(region, dtype=float))


def iou(truth, est, n_vertices: int = IOU_VERTICES) -> float:
    """Area of intersection over area of union.

    Ellipses are replaced by inscribed polygons with ``n_vertices`` vertices;
    ``truth`` may also be any polygonal region, e.g. a plus-sign target.
    """
    a = region_polygon(truth, n_vertices)
    b = region_polygon(est, n_vertices)
    inter = a.intersection(b).area
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


@dataclass
class RunResult:
    """Aligned per-epoch output of one Monte Carlo run.

    ``estimates`` and ``truth`` are ``(K, 8)`` state arrays. ``iou`` is the
    per-epoch overlap against the true region, and ``mode_probs`` holds the
    ``(K, 2)`` IMM mode probabilities when an IMM filter ran.
    """

    times: np.ndarray
    estimates: np.ndarray
    truth: np.ndarray
    iou: np.ndarray
    mode_probs: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.estimates = np.atleast_2d(np.asarray(self.estimates, dtype=float))
        self.truth = np.atleast_2d(np.asarray(self.truth, dtype=float))
        self.iou = np.asarray(self.iou, dtype=float)
        k = len(self.times)
        lengths = {len(self.estimates), len(self.truth), len(self.iou)}
        if self.mode_probs is not None:
            self.mode_probs = np.asarray(self.mode_probs, dtype=float)
            lengths.add(len(self.mode_probs))
        if lengths != {k}:
            raise ValueError("run sequences must have equal length")


@dataclass
class MetricsReport:
    times: np.ndarray
    mean_iou: np.ndarray
    pos_rmse: np.ndarray
    vel_rmse: np.ndarray
    runs: int
    mean_mode_probs: np.ndarray | None = None
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        self.summary = {
            "runs": int(self.runs),
            "mean_iou": float(np.mean(self.mean_iou)),
            "mean_pos_rmse": float(np.mean(self.pos_rmse)),
            "mean_vel_rmse": float(np.mean(self.vel_rmse)),
            "final_iou": float(self.mean_iou[-1]),
        }

    @property
    def iou_mean(self) -> float:
        return self.summary["mean_iou"]

    @property
    def pos_rmse_mean(self) -> float:
        return self.summary["mean_pos_rmse"]

    @property
    def vel_rmse_mean(self) -> float:
        return self.summary["mean_vel_rmse"]

    def to_dict(self) -> dict:
        out = dict(self.summary)
        out["per_epoch"] = {
            "time": self.times.tolist(),
            "iou": self.mean_iou.tolist(),
            "pos_rmse": self.pos_rmse.tolist(),
            "vel_rmse": self.vel_rmse.tolist(),
        }
        if self.mean_mode_probs is not None:
            out["per_epoch"]["mode_probs"] = self.mean_mode_probs.tolist()
        return out


def rmse(runs: list[RunResult]) -> MetricsReport:
    """Per-epoch RMSE over runs, ``sqrt(mean_i |e_i|^2)``, plus mean IoU.

    The scalar summaries are means of the per-epoch curves over epochs.
    """
    if not runs:
        raise ValueError("need at least one run")
    times = runs[0].times
    for r in runs[1:]:
        if r.times.shape != times.shape or not np.allclose(r.times, times):
            raise ValueError("runs are not aligned in time")
    est = np.stack([r.estimates for r in runs])
    tru = np.stack([r.truth for r in runs])
    err = est - tru
    pos_sq = err[..., 3] ** 2 + err[..., 5] ** 2
    vel_sq = err[..., 4] ** 2 + err[..., 6] ** 2
    ious = np.stack([r.iou for r in runs])
    modes = None
    if all(r.mode_probs is not None for r in runs):
        modes = np.mean(np.stack([r.mode_probs for r in runs]), axis=0)
    return MetricsReport(
        times=times.copy(),
        mean_iou=ious.mean(axis=0),
        pos_rmse=np.sqrt(pos_sq.mean(axis=0)),
        vel_rmse=np.sqrt(vel_sq.mean(axis=0)),
        runs=len(runs),
        mean_mode_probs=modes,
    )
