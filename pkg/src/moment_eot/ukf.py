"""Unscented transform and the sequential pseudo-measurement update."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import moments_valid
from .measurement import SCALE_MEAN, SCALE_VAR, NoiseSpec, noise_poly_moments, quadratic_form

# smallest eigenvalue accepted (relative to the trace) before a covariance is
# declared broken rather than repaired
REPAIR_LIMIT = 1e-9
JITTER = 1e-12


class FilterError(RuntimeError):
    """Numerical failure inside a filter step.

    ``matrix`` holds the offending covariance when one is available and
    ``context`` names the operation (and point index for scan updates).
    """

    def __init__(self, message: str, matrix: np.ndarray | None = None, context: str = ""):
        super().__init__(f"{context}: {message}" if context else message)
        self.matrix = matrix
        self.context = context


@dataclass(frozen=True)
class UtParams:
    alpha: float = 1.0
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")

    def lam(self, n: int) -> float:
        return self.alpha**2 * (n + self.kappa) - n

    def weights(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        lam = self.lam(n)
        if n + lam == 0:
            raise ValueError("degenerate unscented scaling: n + lambda == 0")
        wm = np.full(2 * n + 1, 1.0 / (2 * (n + lam)))
        wc = wm.copy()
        wm[0] = lam / (n + lam)
        wc[0] = lam / (n + lam) + (1 - self.alpha**2 + self.beta)
        return wm, wc


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def is_valid(self) -> bool:
        if not np.allclose(self.cov, self.cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(self.cov).max())):
            return False
        sym = 0.5 * (self.cov + self.cov.T)
        return np.linalg.eigvalsh(sym).min() > -1e-10 * np.trace(sym)


def symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def cholesky_repaired(cov: np.ndarray, context: str = "") -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factor of ``cov`` after symmetrization and, if needed, jitter.

    Returns the (possibly repaired) covariance and its factor. Matrices whose
    smallest eigenvalue is below ``-REPAIR_LIMIT * trace`` are rejected.
    """
    cov = symmetrize(cov)
    try:
        return cov, np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    tr = np.trace(cov)
    eig_min = np.linalg.eigvalsh(cov).min() if np.all(np.isfinite(cov)) else -np.inf
    if not np.isfinite(eig_min) or eig_min < -REPAIR_LIMIT * abs(tr) or tr <= 0:
        raise FilterError(
            f"covariance is not positive semidefinite (min eigenvalue {eig_min:.3e}, trace {tr:.3e}); "
            "try a larger initial covariance or process noise",
            matrix=cov,
            context=context,
        )
    jitter = max(0.0, -eig_min) + JITTER * tr
    for _ in range(8):
        repaired = cov + jitter * np.eye(cov.shape[0])
        try:
            return repaired, np.linalg.cholesky(repaired)
        except np.linalg.LinAlgError:
            jitter *= 10
    raise FilterError("covariance repair failed", matrix=cov, context=context)


def matrix_sqrt(cov: np.ndarray, context: str = "") -> np.ndarray:
    """Factor ``S`` with ``S S^T = cov``; semidefinite matrices are accepted."""
    cov = symmetrize(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(cov)
    tr = max(np.trace(cov), 0.0)
    if vals.min() < -REPAIR_LIMIT * tr or not np.all(np.isfinite(vals)):
        raise FilterError("cannot factor a covariance that is not positive semidefinite", cov, context)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sigma_points(belief: GaussianBelief, params: UtParams = UtParams()):
    """Sigma points ``(2n+1, n)`` and the mean / covariance weights."""
    n = belief.dim
    wm, wc = params.weights(n)
    S = matrix_sqrt((n + params.lam(n)) * belief.cov, context="sigma_points")
    pts = np.empty((2 * n + 1, n))
    pts[0] = belief.mean
    pts[1 : n + 1] = belief.mean + S.T
    pts[n + 1 :] = belief.mean - S.T
    return pts, wm, wc


@dataclass(frozen=True)
class UtResult:
    mean: np.ndarray
    cov: np.ndarray
    cross: np.ndarray

    @property
    def belief(self) -> GaussianBelief:
        return GaussianBelief(self.mean, self.cov)


def unscented_transform(
    belief: GaussianBelief,
    params: UtParams,
    fn: Callable[[np.ndarray], np.ndarray],
    vectorized: bool = False,
) -> UtResult:
    """Propagate ``belief`` through ``fn``.

    With ``vectorized=True`` ``fn`` receives all sigma points as rows and must
    return one output row per point.
    """
    pts, wm, wc = sigma_points(belief, params)
    if vectorized:
        ys = np.asarray(fn(pts), dtype=float).reshape(len(pts), -1)
    else:
        ys = np.array([np.atleast_1d(fn(p)) for p in pts], dtype=float)
    y_mean = wm @ ys
    dy = ys - y_mean
    dx = pts - belief.mean
    cov = symmetrize((wc[:, None] * dy).T @ dy)
    cross = (wc[:, None] * dx).T @ dy
    if not np.all(np.isfinite(cov)) or np.linalg.eigvalsh(cov).min() < -REPAIR_LIMIT * abs(np.trace(cov)):
        raise FilterError("propagated covariance is not positive semidefinite", cov, "unscented_transform")
    return UtResult(y_mean, cov, cross)


@dataclass(frozen=True)
class PseudoMoments:
    """Predicted mean, variance and state cross-covariance of one pseudo-measurement."""

    mean: float
    var: float
    cross: np.ndarray


def augmented_belief(belief: GaussianBelief, z, noise: NoiseSpec) -> GaussianBelief:
    """The state extended by the noise polynomial ``f`` and the scale ``s``."""
    mf, vf = noise_poly_moments(z, belief.mean, noise)
    d = belief.dim
    mean = np.concatenate([belief.mean, [mf, SCALE_MEAN]])
    cov = np.zeros((d + 2, d + 2))
    cov[:d, :d] = belief.cov
    cov[d, d] = vf
    cov[d + 1, d + 1] = SCALE_VAR
    return GaussianBelief(mean, cov)


def pseudo_measurement_moments(
    mean: np.ndarray,
    chol: np.ndarray,
    z: np.ndarray,
    noise: NoiseSpec,
    params: UtParams,
) -> PseudoMoments:
    """Unscented transform of the augmented state through the pseudo-measurement.

    ``chol`` is a factor of the state covariance. The augmented covariance is
    block diagonal, so its factor is ``diag(chol, sqrt(var_f), sqrt(var_s))``
    and only the state block is ever factorized. The result is identical to
    running :func:`unscented_transform` on :func:`augmented_belief`.
    """
    d = mean.size
    n = d + 2
    lam = params.lam(n)
    c = np.sqrt(n + lam)
    wm0 = lam / (n + lam)
    wc0 = wm0 + (1 - params.alpha**2 + params.beta)
    wi = 1.0 / (2 * (n + lam))

    mf, vf = noise_poly_moments(z, mean, noise)
    offs = c * chol.T  # row i is the i-th sigma offset
    states = np.concatenate([mean[None, :], mean + offs, mean - offs])
    g = quadratic_form(z, states)
    s0 = SCALE_MEAN
    base = -mf - s0 * s0
    g0 = g[0]
    hp = g[1 : d + 1] + base
    hm = g[d + 1 :] + base
    df = c * np.sqrt(vf)
    ds = c * np.sqrt(SCALE_VAR)
    h0 = g0 + base
    h_extra = np.array(
        [
            g0 - (mf + df) - s0 * s0,
            g0 - (s0 + ds) ** 2 - mf,
            g0 - (mf - df) - s0 * s0,
            g0 - (s0 - ds) ** 2 - mf,
        ]
    )
    mu = wm0 * h0 + wi * (hp.sum() + hm.sum() + h_extra.sum())
    var = (
        wc0 * (h0 - mu) ** 2
        + wi * (np.sum((hp - mu) ** 2) + np.sum((hm - mu) ** 2) + np.sum((h_extra - mu) ** 2))
    )
    cross = wi * (offs.T @ (hp - hm))
    return PseudoMoments(float(mu), float(var), cross)


def ukf_update_point(
    belief: GaussianBelief, z, noise: NoiseSpec, params: UtParams = UtParams()
) -> GaussianBelief:
    """Single pseudo-measurement update against the observed value 0."""
    return ukf_update_scan(belief, np.asarray(z, dtype=float).reshape(1, 2), noise, params)


def ukf_update_scan(
    belief: GaussianBelief,
    points,
    noise: NoiseSpec,
    params: UtParams = UtParams(),
    on_invalid: str = "skip",
) -> GaussianBelief:
    """Process the scan points one at a time, in order.

    A point whose update would move the moment mean outside the cone of
    positive definite moment matrices is skipped (``on_invalid="skip"``) or
    raises :class:`FilterError` (``on_invalid="raise"``).
    """
    return ukf_update_scan_counted(belief, points, noise, params, on_invalid)[0]


def ukf_update_scan_counted(
    belief: GaussianBelief,
    points,
    noise: NoiseSpec,
    params: UtParams = UtParams(),
    on_invalid: str = "skip",
) -> tuple[GaussianBelief, int]:
    """:func:`ukf_update_scan` that also returns the number of skipped points."""
    if on_invalid not in ("skip", "raise"):
        raise ValueError("on_invalid must be 'skip' or 'raise'")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return belief, 0
    mean = belief.mean.copy()
    if not moments_valid(mean[0], mean[1], mean[2]):
        raise FilterError(f"prior moments {mean[:3]} are not a proper ellipse", belief.cov, "ukf_update_scan: prior")
    cov, chol = cholesky_repaired(belief.cov, context="ukf_update_scan: prior")
    skipped = 0
    for idx, z in enumerate(pts):
        pm = pseudo_measurement_moments(mean, chol, z, noise, params)
        if not (pm.var > 0 and np.isfinite(pm.var) and np.isfinite(pm.mean)):
            raise FilterError(
                f"pseudo-measurement variance {pm.var!r} is not positive", cov, f"ukf_update_scan: point {idx}"
            )
        gain = pm.cross / pm.var
        new_mean = mean - gain * pm.mean
        if not moments_valid(new_mean[0], new_mean[1], new_mean[2]):
            if on_invalid == "raise":
                raise FilterError(
                    f"moment estimate {new_mean[:3]} is no longer a proper ellipse",
                    cov,
                    f"ukf_update_scan: point {idx}",
                )
            skipped += 1
            continue
        mean = new_mean
        cov = cov - np.outer(pm.cross, gain)
        cov, chol = cholesky_repaired(cov, context=f"ukf_update_scan: point {idx}")
    return GaussianBelief(mean, cov), skipped
