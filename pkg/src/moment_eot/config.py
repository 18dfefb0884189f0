"""YAML scenario configuration with field-level validation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .dynamics import CtNoiseParams, CvNoiseParams
from .geometry import ExtendedState, MomentVector
from .imm import ModeSet, MotionModel
from .measurement import NoiseSpec
from .simulator import EllipseTarget, PlusSignTarget, ScanSpec, TrajectorySegment
from .ukf import GaussianBelief, UtParams

FILTER_KINDS = ("UKF-CV", "UKF-CT", "UKF-IMM")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing required field")
    return d[key]


def _num(value, where: str, positive: bool = False, non_negative: bool = False) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{where}: must be > 0, got {v}")
    if non_negative and v < 0:
        raise ConfigError(f"{where}: must be >= 0, got {v}")
    return v


def _vec(value, n: int, where: str, non_negative: bool = False) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers, got {value!r}")
    return [_num(v, f"{where}[{i}]", non_negative=non_negative) for i, v in enumerate(value)]


@dataclass
class ShapeConfig:
    kind: str
    dims: list[float]

    @classmethod
    def parse(cls, d: dict, where: str = "shape") -> "ShapeConfig":
        kind = _need(d, "kind", where)
        if kind == "ellipse":
            dims = [_num(_need(d, k, where), f"{where}.{k}", positive=True) for k in ("a1", "a2")]
        elif kind == "plus_sign":
            dims = [_num(_need(d, k, where), f"{where}.{k}", positive=True) for k in ("w1", "h1", "w2", "h2")]
        else:
            raise ConfigError(f"{where}.kind: expected 'ellipse' or 'plus_sign', got {kind!r}")
        return cls(kind, dims)

    def build(self):
        if self.kind == "ellipse":
            return EllipseTarget(*self.dims)
        return PlusSignTarget(*self.dims)

    def to_dict(self) -> dict:
        keys = ("a1", "a2") if self.kind == "ellipse" else ("w1", "h1", "w2", "h2")
        return {"kind": self.kind, **dict(zip(keys, self.dims))}


@dataclass
class TruthConfig:
    position: list[float]
    velocity: list[float]
    orientation_deg: float | None
    segments: list[dict]
    duration: float | None = None

    @classmethod
    def parse(cls, d: dict, where: str = "truth") -> "TruthConfig":
        pos = _vec(_need(d, "position", where), 2, f"{where}.position")
        vel = _vec(d.get("velocity", [0.0, 0.0]), 2, f"{where}.velocity")
        ori = d.get("orientation_deg")
        ori = None if ori is None else _num(ori, f"{where}.orientation_deg")
        segs = d.get("segments") or []
        if not isinstance(segs, list):
            raise ConfigError(f"{where}.segments: expected a list")
        out = []
        for i, s in enumerate(segs):
            w = f"{where}.segments[{i}]"
            kind = str(_need(s, "kind", w)).upper()
            if kind not in ("CV", "CT"):
                raise ConfigError(f"{w}.kind: expected CV or CT, got {kind!r}")
            seg = {"kind": kind, "duration": _num(_need(s, "duration", w), f"{w}.duration", positive=True)}
            if kind == "CT":
                seg["turn_rate_deg"] = _num(_need(s, "turn_rate_deg", w), f"{w}.turn_rate_deg", non_negative=True)
                direction = _need(s, "direction", w)
                if direction not in ("left", "right"):
                    raise ConfigError(f"{w}.direction: expected 'left' or 'right', got {direction!r}")
                seg["direction"] = direction
            out.append(seg)
        dur = d.get("duration")
        dur = None if dur is None else _num(dur, f"{where}.duration", non_negative=True)
        if not out and dur is None:
            dur = 0.0
        return cls(pos, vel, ori, out, dur)

    def build_segments(self) -> list[TrajectorySegment]:
        segs = []
        for s in self.segments:
            rate = 0.0
            if s["kind"] == "CT":
                rate = math.radians(s["turn_rate_deg"]) * (1 if s["direction"] == "left" else -1)
            segs.append(TrajectorySegment(s["kind"], s["duration"], rate))
        return segs

    def initial_state(self) -> ExtendedState:
        return ExtendedState(MomentVector(0.0, 1.0, 1.0), tuple(self.position), tuple(self.velocity))

    @property
    def orientation(self) -> float | None:
        return None if self.orientation_deg is None else math.radians(self.orientation_deg)

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "velocity": list(self.velocity),
            "orientation_deg": self.orientation_deg,
            "segments": [dict(s) for s in self.segments],
            "duration": self.duration,
        }


@dataclass
class ScanConfig:
    count_law: str
    count: float
    noise_var: list[float]
    period: float

    @classmethod
    def parse(cls, d: dict, where: str = "scan") -> "ScanConfig":
        law = _need(d, "count_law", where)
        if law not in ("fixed", "poisson"):
            raise ConfigError(f"{where}.count_law: expected 'fixed' or 'poisson', got {law!r}")
        count = _num(_need(d, "count", where), f"{where}.count", positive=True)
        if law == "fixed" and count != int(count):
            raise ConfigError(f"{where}.count: a fixed count must be an integer")
        noise = _vec(_need(d, "noise_var", where), 2, f"{where}.noise_var", non_negative=True)
        period = _num(_need(d, "period", where), f"{where}.period", positive=True)
        return cls(law, count, noise, period)

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(*self.noise_var)

    def build(self) -> ScanSpec:
        return ScanSpec(self.count_law, self.count, self.noise, self.period)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FilterConfig:
    kind: str
    init_radius: float
    init_position: list[float]
    init_velocity: list[float]
    init_omega_deg: float
    cov_moments: list[float]
    cov_position: float
    cov_velocity: float
    cov_omega_deg: float
    cv_q: float | None = None
    cv_c_im: list[float] | None = None
    ct_w_var: list[float] | None = None
    ct_turn_std_deg: float | None = None
    imm_mu0: list[float] | None = None
    imm_P: list[list[float]] | None = None
    ut: dict = field(default_factory=lambda: {"alpha": 1.0, "beta": 2.0, "kappa": 0.0})

    @classmethod
    def parse(cls, d: dict, where: str = "filter") -> "FilterConfig":
        kind = _need(d, "kind", where)
        if kind not in FILTER_KINDS:
            raise ConfigError(f"{where}.kind: expected one of {FILTER_KINDS}, got {kind!r}")
        init = _need(d, "initial", where)
        wi = f"{where}.initial"
        radius = _num(_need(init, "radius", wi), f"{wi}.radius", positive=True)
        ipos = _vec(_need(init, "position", wi), 2, f"{wi}.position")
        ivel = _vec(init.get("velocity", [0.0, 0.0]), 2, f"{wi}.velocity")
        iom = _num(init.get("omega_deg", 0.0), f"{wi}.omega_deg")
        cov = _need(d, "initial_cov", where)
        wc = f"{where}.initial_cov"
        if "moments" in cov:
            cm = _vec(cov["moments"], 3, f"{wc}.moments", non_negative=True)
        else:
            # default: (r^2 / 4)^2 on every moment
            cm = [(radius**2 / 4) ** 2] * 3
        cpos = _num(_need(cov, "position", wc), f"{wc}.position", positive=True)
        cvel = _num(_need(cov, "velocity", wc), f"{wc}.velocity", positive=True)
        com = _num(cov.get("omega_std_deg", 1.0), f"{wc}.omega_std_deg", positive=True)
        if min(cm) <= 0:
            raise ConfigError(f"{wc}.moments: variances must be > 0")

        cfg = cls(kind, radius, ipos, ivel, iom, cm, cpos, cvel, com)
        if kind in ("UKF-CV", "UKF-IMM"):
            cv = _need(d, "cv", where)
            cfg.cv_q = _num(_need(cv, "q", f"{where}.cv"), f"{where}.cv.q", non_negative=True)
            cfg.cv_c_im = _vec(_need(cv, "c_im", f"{where}.cv"), 3, f"{where}.cv.c_im", non_negative=True)
        if kind in ("UKF-CT", "UKF-IMM"):
            ct = _need(d, "ct", where)
            cfg.ct_w_var = _vec(_need(ct, "w_var", f"{where}.ct"), 5, f"{where}.ct.w_var", non_negative=True)
            cfg.ct_turn_std_deg = _num(
                _need(ct, "turn_std_deg", f"{where}.ct"), f"{where}.ct.turn_std_deg", non_negative=True
            )
        if kind == "UKF-IMM":
            imm = _need(d, "imm", where)
            mu0 = _vec(_need(imm, "mu0", f"{where}.imm"), 2, f"{where}.imm.mu0", non_negative=True)
            P = _need(imm, "P", f"{where}.imm")
            if not isinstance(P, list) or len(P) != 2:
                raise ConfigError(f"{where}.imm.P: expected a 2x2 matrix")
            P = [_vec(row, 2, f"{where}.imm.P[{i}]", non_negative=True) for i, row in enumerate(P)]
            try:
                ModeSet(mu0, P)
            except ValueError as exc:
                raise ConfigError(f"{where}.imm: {exc}") from None
            cfg.imm_mu0, cfg.imm_P = mu0, P
        ut = d.get("ut") or {}
        ut = {k: _num(ut.get(k, dflt), f"{where}.ut.{k}") for k, dflt in (("alpha", 1.0), ("beta", 2.0), ("kappa", 0.0))}
        try:
            UtParams(**ut)
        except ValueError as exc:
            raise ConfigError(f"{where}.ut: {exc}") from None
        cfg.ut = ut
        return cfg

    @property
    def ut_params(self) -> UtParams:
        return UtParams(**self.ut)

    def prior(self) -> GaussianBelief:
        r2 = self.init_radius**2 / 4
        mean = np.array(
            [
                0.0,
                r2,
                r2,
                self.init_position[0],
                self.init_velocity[0],
                self.init_position[1],
                self.init_velocity[1],
                math.radians(self.init_omega_deg),
            ]
        )
        cov = np.diag(
            [
                *self.cov_moments,
                self.cov_position,
                self.cov_velocity,
                self.cov_position,
                self.cov_velocity,
                math.radians(self.cov_omega_deg) ** 2,
            ]
        )
        return GaussianBelief(mean, cov)

    def models(self) -> list[MotionModel]:
        out = []
        if self.kind in ("UKF-CV", "UKF-IMM"):
            out.append(MotionModel("CV", CvNoiseParams(self.cv_q, self.cv_c_im)))
        if self.kind in ("UKF-CT", "UKF-IMM"):
            w = [*self.ct_w_var, math.radians(self.ct_turn_std_deg) ** 2]
            out.append(MotionModel("CT", CtNoiseParams(w)))
        return out

    def modes(self) -> ModeSet | None:
        if self.kind != "UKF-IMM":
            return None
        return ModeSet(self.imm_mu0, self.imm_P)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "kind": self.kind,
            "initial": {
                "radius": self.init_radius,
                "position": list(self.init_position),
                "velocity": list(self.init_velocity),
                "omega_deg": self.init_omega_deg,
            },
            "initial_cov": {
                "moments": list(self.cov_moments),
                "position": self.cov_position,
                "velocity": self.cov_velocity,
                "omega_std_deg": self.cov_omega_deg,
            },
            "ut": dict(self.ut),
        }
        if self.cv_q is not None:
            d["cv"] = {"q": self.cv_q, "c_im": list(self.cv_c_im)}
        if self.ct_w_var is not None:
            d["ct"] = {"w_var": list(self.ct_w_var), "turn_std_deg": self.ct_turn_std_deg}
        if self.imm_mu0 is not None:
            d["imm"] = {"mu0": list(self.imm_mu0), "P": [list(r) for r in self.imm_P]}
        return d


@dataclass
class ScenarioConfig:
    name: str
    shape: ShapeConfig
    truth: TruthConfig
    scan: ScanConfig
    filter: FilterConfig
    runs: int = 100
    seed: int = 0
    iou_truth: str = "region"
    description: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a mapping at the top level")
        name = str(_need(d, "name", "config"))
        runs = d.get("runs", 100)
        if not isinstance(runs, int) or isinstance(runs, bool) or runs < 1:
            raise ConfigError(f"config.runs: expected an integer >= 1, got {runs!r}")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"config.seed: expected a non-negative integer, got {seed!r}")
        iou_truth = d.get("iou_truth", "region")
        if iou_truth not in ("region", "moment_ellipse"):
            raise ConfigError(f"config.iou_truth: expected 'region' or 'moment_ellipse', got {iou_truth!r}")
        return cls(
            name=name,
            shape=ShapeConfig.parse(_need(d, "shape", "config")),
            truth=TruthConfig.parse(_need(d, "truth", "config")),
            scan=ScanConfig.parse(_need(d, "scan", "config")),
            filter=FilterConfig.parse(_need(d, "filter", "config")),
            runs=runs,
            seed=seed,
            iou_truth=iou_truth,
            description=str(d.get("description", "")),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "runs": self.runs,
            "seed": self.seed,
            "iou_truth": self.iou_truth,
            "shape": self.shape.to_dict(),
            "truth": self.truth.to_dict(),
            "scan": self.scan.to_dict(),
            "filter": self.filter.to_dict(),
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def load_config(source) -> ScenarioConfig:
    """Load a config from a path, a YAML string, or a built-in scenario name."""
    if isinstance(source, dict):
        return ScenarioConfig.from_dict(source)
    text = None
    source = str(source) if not isinstance(source, Path) else source
    if isinstance(source, str) and "\n" in source:
        text = source
    elif Path(source).is_file():
        text = Path(source).read_text(encoding="utf-8")
    elif str(source) in builtin_scenarios():
        text = builtin_path(str(source)).read_text(encoding="utf-8")
    if text is None:
        raise ConfigError(f"config: no such file or built-in scenario: {source}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML: {exc}") from None
    return ScenarioConfig.from_dict(data)


def _scenario_dir():
    return resources.files("moment_eot") / "scenarios"


def builtin_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in _scenario_dir().iterdir() if p.name.endswith(".yaml"))


def builtin_path(name: str):
    return _scenario_dir() / f"{name}.yaml"
