"""Interacting multiple model estimation over CV and CT moment dynamics.

One IMM cycle is

    mix -> predict per model -> likelihood on the prediction
        -> sequential update per model -> mode update -> combine

The mode likelihood is the average log-likelihood of the scan,
``exp(log L / n)``, which makes mode switching independent of how many
points a scan happens to contain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import CtNoiseParams, CvNoiseParams, predict
from .measurement import NoiseSpec
from .ukf import (
    FilterError,
    GaussianBelief,
    UtParams,
    cholesky_repaired,
    pseudo_measurement_moments,
    symmetrize,
    ukf_update_scan,
)

MODE_FLOOR = 1e-6
STARVATION = 1e-300


@dataclass(frozen=True)
class MotionModel:
    """A named motion model (``"CV"`` or ``"CT"``) with its process noise."""

    name: str
    params: CvNoiseParams | CtNoiseParams

    def __post_init__(self):
        name = self.name.upper()
        expected = {"CV": CvNoiseParams, "CT": CtNoiseParams}
        if name not in expected:
            raise ValueError(f"unknown motion model {self.name!r}")
        if not isinstance(self.params, expected[name]):
            raise TypeError(f"{name} model needs {expected[name].__name__}")
        object.__setattr__(self, "name", name)

    def predict(self, belief: GaussianBelief, T: float, ut: UtParams) -> GaussianBelief:
        return predict(belief, self.name, self.params, T, ut)


@dataclass(frozen=True)
class ModeSet:
    """Mode probabilities ``mu`` and row-stochastic Markov matrix ``P``.

    ``P[i, j]`` is the probability of switching from mode ``i`` to mode ``j``.
    """

    mu: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        if P.shape != (mu.size, mu.size):
            raise ValueError(f"transition matrix shape {P.shape} does not match {mu.size} modes")
        if np.any(mu < 0) or abs(mu.sum() - 1) > 1e-12:
            raise ValueError("mode probabilities must be non-negative and sum to 1")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-12):
            raise ValueError("each row of the transition matrix must sum to 1")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "P", P)

    @property
    def n_modes(self) -> int:
        return self.mu.size

    def predicted(self) -> np.ndarray:
        """``c_j = sum_i P[i, j] mu_i``."""
        return self.mu @ self.P


@dataclass(frozen=True)
class LikelihoodReport:
    log_lik: float
    avg_lik: float
    n: int


def combine(beliefs: list[GaussianBelief], weights) -> GaussianBelief:
    """Moment-matched single Gaussian of a weighted mixture."""
    w = np.asarray(weights, dtype=float)
    means = np.stack([b.mean for b in beliefs])
    mean = w @ means
    cov = np.zeros_like(beliefs[0].cov)
    for wi, b in zip(w, beliefs):
        d = b.mean - mean
        cov = cov + wi * (b.cov + np.outer(d, d))
    return GaussianBelief(mean, symmetrize(cov))


def imm_mix(beliefs: list[GaussianBelief], modes: ModeSet) -> tuple[list[GaussianBelief], np.ndarray]:
    """Per-model mixed priors and the predicted mode probabilities ``c``."""
    if len(beliefs) != modes.n_modes:
        raise ValueError("one belief per mode is required")
    if len({b.dim for b in beliefs}) != 1:
        raise ValueError("all models must share the same state dimension")
    c = modes.predicted()
    if np.any(c < STARVATION):
        raise FilterError(f"mode starvation, predicted probabilities {c}", context="imm_mix")
    mix = (modes.P * modes.mu[:, None]) / c[None, :]  # mix[i, j] = mu^{i|j}
    return [combine(beliefs, mix[:, j]) for j in range(modes.n_modes)], c


def model_likelihood(
    belief_pred: GaussianBelief, points, noise: NoiseSpec, params: UtParams = UtParams()
) -> LikelihoodReport:
    """Average log-likelihood of a scan under one model's predicted belief.

    Every point's pseudo-measurement moments come from the same predicted
    belief; the belief is not updated in between.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return LikelihoodReport(0.0, 1.0, 0)
    _, chol = cholesky_repaired(belief_pred.cov, context="model_likelihood")
    log_lik = 0.0
    for idx, z in enumerate(pts):
        pm = pseudo_measurement_moments(belief_pred.mean, chol, z, noise, params)
        if not (pm.var > 0 and np.isfinite(pm.var)):
            raise FilterError(f"pseudo-measurement variance {pm.var!r} is not positive", context=f"model_likelihood: point {idx}")
        log_lik += -0.5 * pm.mean**2 / pm.var - 0.5 * np.log(2 * np.pi * pm.var)
    avg = float(np.exp(log_lik / len(pts)))
    return LikelihoodReport(float(log_lik), avg, len(pts))


def update_modes(c: np.ndarray, avg_liks) -> np.ndarray:
    """``mu_j ~ L_j c_j`` normalized, with a floor so no mode dies for good."""
    lik = np.asarray(avg_liks, dtype=float)
    mu = lik * c
    total = mu.sum()
    if not np.isfinite(total) or total <= 0:
        raise FilterError(f"all mode likelihoods underflowed: {lik}", context="imm_step")
    mu = mu / total
    if mu.size > 1:
        mu = np.maximum(mu, MODE_FLOOR)
        mu = mu / mu.sum()
    return mu


@dataclass(frozen=True)
class ImmStepResult:
    beliefs: list[GaussianBelief]
    modes: ModeSet
    combined: GaussianBelief
    likelihoods: list[LikelihoodReport]


def imm_step(
    beliefs: list[GaussianBelief],
    modes: ModeSet,
    models: list[MotionModel],
    points,
    noise: NoiseSpec,
    T: float | None,
    ut: UtParams = UtParams(),
) -> ImmStepResult:
    """One IMM cycle. ``T=None`` skips mixing and prediction (first scan)."""
    if T is None:
        priors, c = list(beliefs), modes.mu
    else:
        mixed, c = imm_mix(beliefs, modes)
        priors = [m.predict(b, T, ut) for m, b in zip(models, mixed)]
    reports = [model_likelihood(b, points, noise, ut) for b in priors]
    posts = [ukf_update_scan(b, points, noise, ut) for b in priors]
    mu = update_modes(c, [r.avg_lik for r in reports])
    new_modes = ModeSet(mu, modes.P)
    return ImmStepResult(posts, new_modes, combine(posts, mu), reports)


class UkfTracker:
    """Single-model UKF: predict with one motion model, then update sequentially."""

    def __init__(self, prior: GaussianBelief, model: MotionModel, noise: NoiseSpec, ut: UtParams = UtParams()):
        self.belief = prior
        self.model = model
        self.noise = noise
        self.ut = ut
        self._started = False

    @property
    def estimate(self) -> GaussianBelief:
        return self.belief

    @property
    def mode_probs(self):
        return None

    def step(self, points, T: float) -> GaussianBelief:
        prior = self.model.predict(self.belief, T, self.ut) if self._started else self.belief
        self._started = True
        self.belief = ukf_update_scan(prior, points, self.noise, self.ut)
        return self.belief


class ImmTracker:
    """UKF-IMM over a list of motion models sharing the 8-dimensional state."""

    def __init__(
        self,
        prior: GaussianBelief,
        models: list[MotionModel],
        modes: ModeSet,
        noise: NoiseSpec,
        ut: UtParams = UtParams(),
    ):
        if len(models) != modes.n_modes:
            raise ValueError("one motion model per mode is required")
        self.models = list(models)
        self.modes = modes
        self.beliefs = [prior] * len(models)
        self.noise = noise
        self.ut = ut
        self.combined = prior
        self.last_likelihoods: list[LikelihoodReport] = []
        self._started = False

    @property
    def estimate(self) -> GaussianBelief:
        return self.combined

    @property
    def mode_probs(self) -> np.ndarray:
        return self.modes.mu

    def step(self, points, T: float) -> GaussianBelief:
        res = imm_step(
            self.beliefs, self.modes, self.models, points, self.noise, T if self._started else None, self.ut
        )
        self._started = True
        self.beliefs, self.modes, self.combined = res.beliefs, res.modes, res.combined
        self.last_likelihoods = res.likelihoods
        return self.combined
