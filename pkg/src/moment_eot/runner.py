"""Monte Carlo execution of scenarios and replay of bounding-box logs."""

from __future__ import annotations

import copy
import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .geometry import EllipseShape, ExtendedState, GeometryError, MomentVector, moments_to_ellipse
from .imm import ImmTracker, UkfTracker
from .metrics import MetricsReport, RunResult, iou, rmse
from .simulator import (
    MeasurementScan,
    TruthEpoch,
    generate_scans,
    generate_truth,
    rotate_moments,
    run_rng,
)
from .ukf import FilterError

TRACK_COLUMNS = [
    "epoch", "time", "xc", "vx", "yc", "vy", "omega", "n11", "n20", "n02",
    "a1", "a2", "alpha", "mode_mu_cv", "mode_mu_ct",
]
MODE_COLUMNS = ["epoch", "time", "mode_mu_cv", "mode_mu_ct"]


def make_tracker(config: ScenarioConfig):
    f = config.filter
    models = f.models()
    prior = f.prior()
    if f.kind == "UKF-IMM":
        return ImmTracker(prior, models, f.modes(), config.scan.noise, f.ut_params)
    return UkfTracker(prior, models[0], config.scan.noise, f.ut_params)


def _mode_pair(config: ScenarioConfig, tracker) -> tuple[float, float]:
    if tracker.mode_probs is not None:
        return float(tracker.mode_probs[0]), float(tracker.mode_probs[1])
    return (1.0, 0.0) if config.filter.kind == "UKF-CV" else (0.0, 1.0)


def track(config: ScenarioConfig, scans: list[MeasurementScan], truth_regions, truth_states) -> RunResult:
    """Run the configured filter over ``scans`` and score it against the truth."""
    tracker = make_tracker(config)
    est, ious, modes = [], [], []
    prev_t = None
    for k, scan in enumerate(scans):
        T = None if prev_t is None else scan.time - prev_t
        prev_t = scan.time
        try:
            belief = tracker.step(scan.points, T)
            shape = ExtendedState.from_vector(belief.mean).ellipse()
        except GeometryError as exc:
            raise FilterError(str(exc), context=f"epoch {k}: estimate") from exc
        except FilterError as exc:
            raise FilterError(str(exc), exc.matrix, f"epoch {k} (t={scan.time:g})") from exc
        est.append(belief.mean.copy())
        ious.append(iou(truth_regions[k], shape))
        modes.append(_mode_pair(config, tracker))
    return RunResult(
        times=[s.time for s in scans],
        estimates=np.array(est),
        truth=np.array(truth_states),
        iou=np.array(ious),
        mode_probs=np.array(modes) if config.filter.kind == "UKF-IMM" else None,
    )


def truth_region(config: ScenarioConfig, shape, epoch: TruthEpoch):
    if config.iou_truth == "moment_ellipse":
        m = rotate_moments(shape.body_moments(), epoch.orientation)
        a1, a2, alpha = moments_to_ellipse(m)
        return EllipseShape(a1, a2, alpha, epoch.pos)
    return shape.region(epoch.pos, epoch.orientation)


def simulate_run(config: ScenarioConfig, run: int) -> RunResult:
    """One seeded Monte Carlo run of a simulated scenario."""
    shape = config.shape.build()
    truth = generate_truth(
        config.truth.initial_state(),
        config.truth.build_segments(),
        config.scan.period,
        orientation=config.truth.orientation,
        duration=config.truth.duration,
    )
    scans = generate_scans(truth, shape, config.scan.build(), run_rng(config.seed, run))
    regions = [truth_region(config, shape, e) for e in truth]
    states = [e.state(shape).to_vector() for e in truth]
    return track(config, scans, regions, states)


def _simulate(args):
    return simulate_run(*args)


def run_monte_carlo(config: ScenarioConfig, runs: int | None = None, workers: int = 1) -> list[RunResult]:
    n = config.runs if runs is None else runs
    jobs = [(config, i) for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_simulate, jobs))
    return [_simulate(j) for j in jobs]


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_track_csv(path: Path, result: RunResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for k, (t, x) in enumerate(zip(result.times, result.estimates)):
            a1, a2, alpha = moments_to_ellipse(x[:3])
            mu = result.mode_probs[k] if result.mode_probs is not None else (np.nan, np.nan)
            w.writerow(
                [k, _fmt(t)]
                + [_fmt(x[i]) for i in (3, 4, 5, 6, 7, 0, 1, 2)]
                + [_fmt(a1), _fmt(a2), _fmt(alpha), _fmt(mu[0]), _fmt(mu[1])]
            )


def write_artifacts(out_dir, config: ScenarioConfig, results: list[RunResult], report: MetricsReport) -> Path:
    """Track CSV per run, mean mode probabilities (IMM) and a metrics JSON."""
    out = Path(out_dir)
    (out / "tracks").mkdir(parents=True, exist_ok=True)
    for i, r in enumerate(results):
        if r.mode_probs is None:
            fixed = (1.0, 0.0) if config.filter.kind == "UKF-CV" else (0.0, 1.0)
            r = RunResult(r.times, r.estimates, r.truth, r.iou, np.tile(fixed, (len(r.times), 1)))
        write_track_csv(out / "tracks" / f"run_{i:04d}.csv", r)
    if report.mean_mode_probs is not None:
        with open(out / "modes.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MODE_COLUMNS)
            for k, (t, mu) in enumerate(zip(report.times, report.mean_mode_probs)):
                w.writerow([k, _fmt(t), _fmt(mu[0]), _fmt(mu[1])])
    payload = {"scenario": config.name, "seed": config.seed, **report.to_dict()}
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


@dataclass
class ScenarioOutcome:
    report: MetricsReport
    results: list[RunResult]


def run_scenario(
    config: ScenarioConfig, runs: int | None = None, out_dir=None, workers: int = 1
) -> ScenarioOutcome:
    """Run all Monte Carlo runs, aggregate metrics and optionally write artifacts."""
    results = run_monte_carlo(config, runs, workers)
    report = rmse(results)
    if out_dir is not None:
        write_artifacts(out_dir, config, results, report)
    return ScenarioOutcome(report, results)


@dataclass(frozen=True)
class BoundingBoxRecord:
    frame: int
    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"frame {self.frame}: box width and height must be positive")


def read_bboxes(path) -> list[BoundingBoxRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = ["frame", "cx", "cy", "w", "h", "theta"]
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
            raise ValueError(f"{path}: header must contain {','.join(need)}")
        recs = [
            BoundingBoxRecord(int(r["frame"]), *(float(r[c]) for c in need[1:]))
            for r in reader
        ]
    return recs


def write_bboxes(path, records: list[BoundingBoxRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "cx", "cy", "w", "h", "theta"])
        for r in records:
            w.writerow([r.frame, _fmt(r.cx), _fmt(r.cy), _fmt(r.w), _fmt(r.h), _fmt(r.theta)])


def _sample_box(rec: BoundingBoxRecord, n: int, rng: np.random.Generator) -> np.ndarray:
    body = rng.uniform((-rec.w / 2, -rec.h / 2), (rec.w / 2, rec.h / 2), size=(n, 2))
    c, s = np.cos(rec.theta), np.sin(rec.theta)
    return np.column_stack([rec.cx + c * body[:, 0] - s * body[:, 1], rec.cy + s * body[:, 0] + c * body[:, 1]])


def replay_run(records: list[BoundingBoxRecord], config: ScenarioConfig, run: int) -> RunResult:
    """One Monte Carlo run over a box log: sample, add noise, track, score.

    Frame ``k`` is observed at ``frame * period``. The track starts at the
    first box centre. Truth velocity is the finite difference of box centres
    and IoU is scored against the ellipse inscribed in each box.
    """
    config = copy.deepcopy(config)
    config.filter.init_position = [records[0].cx, records[0].cy]
    spec = config.scan.build()
    rng = run_rng(config.seed, run)
    sx, sy = np.sqrt(spec.noise.sigma_x2), np.sqrt(spec.noise.sigma_y2)
    times = np.array([r.frame * spec.period for r in records])
    centres = np.array([[r.cx, r.cy] for r in records])
    if len(records) > 1:
        vel = np.gradient(centres, times, axis=0)
    else:
        vel = np.zeros((1, 2))
    scans, regions, states = [], [], []
    for k, rec in enumerate(records):
        n = spec.draw_count(rng)
        pts = _sample_box(rec, n, rng) + rng.standard_normal((n, 2)) * (sx, sy)
        scans.append(MeasurementScan(float(times[k]), pts, spec.noise))
        ell = EllipseShape.from_axes(rec.w / 2, rec.h / 2, rec.theta, (rec.cx, rec.cy))
        regions.append(ell)
        m = rotate_moments(MomentVector(0.0, rec.w**2 / 16, rec.h**2 / 16), rec.theta)
        states.append(np.array([m.n11, m.n20, m.n02, rec.cx, vel[k, 0], rec.cy, vel[k, 1], 0.0]))
    return track(config, scans, regions, states)


def replay_bboxes(
    records: list[BoundingBoxRecord], config: ScenarioConfig, runs: int | None = None, out_dir=None
) -> ScenarioOutcome:
    if not records:
        raise ValueError("bounding-box log is empty")
    frames = [r.frame for r in records]
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ValueError("frame indices must be strictly increasing")
    n = config.runs if runs is None else runs
    results = [replay_run(records, config, i) for i in range(n)]
    report = rmse(results)
    if out_dir is not None:
        write_artifacts(out_dir, config, results, report)
    return ScenarioOutcome(report, results)
