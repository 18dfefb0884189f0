"""Ground truth, target shapes and noisy point scans for Monte Carlo studies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from shapely import affinity
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

from .geometry import EllipseShape, ExtendedState, MomentVector
from .measurement import NoiseSpec


def run_rng(seed: int, run: int = 0) -> np.random.Generator:
    """Independent, reproducible PCG64 stream for Monte Carlo run ``run``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run),))
    return np.random.Generator(np.random.PCG64(ss))


def rotate_moments(m: MomentVector, angle: float) -> MomentVector:
    """Moments of the region rotated counter-clockwise by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    N = R @ m.matrix() @ R.T
    return MomentVector(float(N[0, 1]), float(N[0, 0]), float(N[1, 1]))


def _to_world(body: np.ndarray, centroid, orientation: float) -> np.ndarray:
    c, s = np.cos(orientation), np.sin(orientation)
    x = centroid[0] + c * body[:, 0] - s * body[:, 1]
    y = centroid[1] + s * body[:, 0] + c * body[:, 1]
    return np.column_stack([x, y])


@dataclass(frozen=True)
class EllipseTarget:
    """Elliptic target with semi-axis ``a1`` along the body x axis and ``a2`` along y."""

    a1: float
    a2: float
    kind: str = field(default="ellipse", init=False)

    def __post_init__(self):
        if self.a1 <= 0 or self.a2 <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    @property
    def area(self) -> float:
        return float(np.pi * self.a1 * self.a2)

    def body_moments(self) -> MomentVector:
        return MomentVector(0.0, self.a1**2 / 4, self.a2**2 / 4)

    def sample_body(self, n: int, rng: np.random.Generator) -> np.ndarray:
        r = np.sqrt(rng.random(n))
        phi = rng.random(n) * 2 * np.pi
        return np.column_stack([self.a1 * r * np.cos(phi), self.a2 * r * np.sin(phi)])

    def region(self, centroid, orientation: float) -> EllipseShape:
        return EllipseShape.from_axes(self.a1, self.a2, orientation, centroid)


@dataclass(frozen=True)
class PlusSignTarget:
    """Union of two concentric, axis-aligned rectangles (full widths and heights)."""

    w1: float
    h1: float
    w2: float
    h2: float
    kind: str = field(default="plus_sign", init=False)

    def __post_init__(self):
        if min(self.w1, self.h1, self.w2, self.h2) <= 0:
            raise ValueError("rectangle dimensions must be positive")

    @property
    def _overlap(self) -> tuple[float, float]:
        return min(self.w1, self.w2), min(self.h1, self.h2)

    @property
    def area(self) -> float:
        wo, ho = self._overlap
        return self.w1 * self.h1 + self.w2 * self.h2 - wo * ho

    def body_moments(self) -> MomentVector:
        wo, ho = self._overlap
        ixx = (self.w1**3 * self.h1 + self.w2**3 * self.h2 - wo**3 * ho) / 12
        iyy = (self.w1 * self.h1**3 + self.w2 * self.h2**3 - wo * ho**3) / 12
        return MomentVector(0.0, ixx / self.area, iyy / self.area)

    def sample_body(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # rejection over the bounding box so the overlap is not counted twice
        half_w = max(self.w1, self.w2) / 2
        half_h = max(self.h1, self.h2) / 2
        out = np.empty((0, 2))
        while len(out) < n:
            k = max(2 * (n - len(out)), 16)
            p = rng.uniform((-half_w, -half_h), (half_w, half_h), size=(k, 2))
            ax, ay = np.abs(p[:, 0]), np.abs(p[:, 1])
            inside = ((ax <= self.w1 / 2) & (ay <= self.h1 / 2)) | ((ax <= self.w2 / 2) & (ay <= self.h2 / 2))
            out = np.concatenate([out, p[inside]])
        return out[:n]

    def region(self, centroid, orientation: float) -> Polygon:
        poly = unary_union(
            [
                box(-self.w1 / 2, -self.h1 / 2, self.w1 / 2, self.h1 / 2),
                box(-self.w2 / 2, -self.h2 / 2, self.w2 / 2, self.h2 / 2),
            ]
        )
        poly = affinity.rotate(poly, orientation, origin=(0, 0), use_radians=True)
        return affinity.translate(poly, centroid[0], centroid[1])


TargetShape = Union[EllipseTarget, PlusSignTarget]


def sample_target(shape: TargetShape, pose, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over the shape placed at ``pose = (centroid, orientation)``."""
    centroid, orientation = pose
    if n <= 0:
        return np.empty((0, 2))
    return _to_world(shape.sample_body(n, rng), centroid, orientation)


@dataclass(frozen=True)
class TrajectorySegment:
    """Motion over ``duration`` seconds; ``turn_rate`` is signed, positive turns left."""

    kind: str
    duration: float
    turn_rate: float = 0.0

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ("CV", "CT"):
            raise ValueError(f"segment kind must be CV or CT, got {self.kind!r}")
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        object.__setattr__(self, "kind", kind)
        if kind == "CV":
            object.__setattr__(self, "turn_rate", 0.0)


@dataclass(frozen=True)
class ScanSpec:
    """How many points each scan holds, their noise, and the scan period."""

    count_law: str
    count: float
    noise: NoiseSpec
    period: float

    def __post_init__(self):
        if self.count_law not in ("fixed", "poisson"):
            raise ValueError(f"count_law must be 'fixed' or 'poisson', got {self.count_law!r}")
        if self.count <= 0 or self.period <= 0:
            raise ValueError("count and period must be positive")

    def draw_count(self, rng: np.random.Generator) -> int:
        if self.count_law == "fixed":
            return int(self.count)
        return int(rng.poisson(self.count))


@dataclass(frozen=True)
class TruthEpoch:
    time: float
    pos: tuple[float, float]
    vel: tuple[float, float]
    omega: float
    orientation: float

    def state(self, shape: TargetShape) -> ExtendedState:
        m = rotate_moments(shape.body_moments(), self.orientation)
        return ExtendedState(m, self.pos, self.vel, self.omega)


@dataclass(frozen=True)
class MeasurementScan:
    time: float
    points: np.ndarray
    noise: NoiseSpec

    def __len__(self) -> int:
        return len(self.points)


def _advance(pos, vel, orientation, omega, tau):
    x, y = pos
    vx, vy = vel
    wt = omega * tau
    if abs(wt) < 1e-12:
        return (x + vx * tau, y + vy * tau), (vx, vy), orientation
    c, s = np.cos(wt), np.sin(wt)
    sw, cw = s / omega, (1 - c) / omega
    new_pos = (x + sw * vx - cw * vy, y + cw * vx + sw * vy)
    new_vel = (c * vx - s * vy, s * vx + c * vy)
    return new_pos, new_vel, orientation + wt


def generate_truth(
    initial: ExtendedState,
    segments: list[TrajectorySegment],
    period: float,
    orientation: float | None = None,
    duration: float | None = None,
) -> list[TruthEpoch]:
    """Noise-free epochs at ``0, period, 2 period, ...`` through the segments.

    Only the kinematic part of ``initial`` is used; the shape pose is set by
    ``orientation`` (radians, body x axis), which defaults to the initial
    heading, or 0 for a target at rest. The shape turns rigidly with the
    centroid during CT segments. ``duration`` defaults to the total segment
    time; past the last segment the target keeps a constant velocity.
    """
    pos, vel = initial.pos, initial.vel
    if orientation is None:
        orientation = float(np.arctan2(vel[1], vel[0])) if np.hypot(*vel) > 0 else 0.0
    total = sum(s.duration for s in segments)
    duration = total if duration is None else duration
    n_epochs = int(np.floor(duration / period + 1e-9)) + 1
    bounds = np.cumsum([0.0] + [s.duration for s in segments])

    def rate_at(t):
        for seg, start, end in zip(segments, bounds[:-1], bounds[1:]):
            if start <= t < end:
                return seg.turn_rate, end
        return 0.0, np.inf

    epochs = []
    t = 0.0
    p, v, ori = (float(pos[0]), float(pos[1])), (float(vel[0]), float(vel[1])), float(orientation)
    for k in range(n_epochs):
        target_t = k * period
        while t < target_t - 1e-12:
            omega, seg_end = rate_at(t + 1e-12)
            step = min(target_t, seg_end) - t
            p, v, ori = _advance(p, v, ori, omega, step)
            t += step
        t = target_t
        omega, _ = rate_at(t + 1e-12)
        epochs.append(TruthEpoch(t, p, v, omega, ori))
    return epochs


def generate_scans(
    truth: list[TruthEpoch], shape: TargetShape, spec: ScanSpec, rng: np.random.Generator
) -> list[MeasurementScan]:
    scans = []
    sx, sy = np.sqrt(spec.noise.sigma_x2), np.sqrt(spec.noise.sigma_y2)
    for epoch in truth:
        n = spec.draw_count(rng)
        pts = sample_target(shape, (epoch.pos, epoch.orientation), n, rng)
        noise = rng.standard_normal((n, 2)) * (sx, sy)
        scans.append(MeasurementScan(epoch.time, pts + noise, spec.noise))
    return scans
