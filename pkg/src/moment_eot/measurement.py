"""Random-hypersurface pseudo-measurement built on the moment ellipse.

A noise-free point inside the target satisfies ``g(z) - s^2 = 0`` with
``g`` the quadratic form of :func:`moment_eot.geometry.implicit_value`.
For a noisy point ``z`` the noise enters through a polynomial ``f`` in the
noise draw, so that ``g(z) - f - s^2 = 0``. ``f`` is moment-matched to a
Gaussian, and ``s`` is approximated by ``N(2/3, 1/18)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCALE_MEAN = 2.0 / 3.0
SCALE_VAR = 1.0 / 18.0


@dataclass(frozen=True)
class NoiseSpec:
    """Per-axis variances of the additive Gaussian point noise."""

    sigma_x2: float
    sigma_y2: float

    def __post_init__(self):
        if self.sigma_x2 < 0 or self.sigma_y2 < 0:
            raise ValueError("noise variances must be non-negative")

    @classmethod
    def isotropic(cls, var: float) -> "NoiseSpec":
        return cls(var, var)


def _unpack(state):
    x = state.to_vector() if hasattr(state, "to_vector") else np.asarray(state, dtype=float)
    return x[..., 0], x[..., 1], x[..., 2], x[..., 3], x[..., 5]


def quadratic_form(z, states) -> np.ndarray:
    """``g(z, p)`` without the scale term, vectorized over stacked states."""
    n11, n20, n02, xc, yc = _unpack(states)
    dx = z[0] - xc
    dy = z[1] - yc
    rho = 0.25 / (n20 * n02 - n11 * n11)
    return rho * (n02 * dx * dx + n20 * dy * dy - 2 * n11 * dx * dy)


def pseudo_measurement(z, state, f_value, s) -> np.ndarray | float:
    """Pseudo-measurement ``g(z, p) - f - s^2``; its observed value is 0."""
    z = np.asarray(z, dtype=float)
    return quadratic_form(z, state) - f_value - np.square(s)


def noise_poly_moments(z, state, noise: NoiseSpec) -> tuple[float, float]:
    """Mean and variance of the noise polynomial ``f`` at point ``z``."""
    n11, n20, n02, xc, yc = (float(v) for v in _unpack(state))
    sx2, sy2 = noise.sigma_x2, noise.sigma_y2
    rho = 0.25 / (n20 * n02 - n11**2)
    dx = z[0] - xc
    dy = z[1] - yc
    mean = rho * (n02 * sx2 + n20 * sy2)
    var = rho**2 * (
        2 * n02**2 * sx2**2
        + 2 * n20**2 * sy2**2
        + 4 * n11**2 * sx2 * sy2
        + 4 * (n02 * dx - n11 * dy) ** 2 * sx2
        + 4 * (n20 * dy - n11 * dx) ** 2 * sy2
    )
    return float(mean), float(var)


def noise_poly_sample(z, state, noise: NoiseSpec | None, nu) -> np.ndarray | float:
    """Evaluate ``f`` for explicit noise draws ``nu`` (shape ``(2,)`` or ``(k, 2)``).

    ``noise`` is unused; it is accepted to mirror :func:`noise_poly_moments`.
    """
    n11, n20, n02, xc, yc = (float(v) for v in _unpack(state))
    nu = np.asarray(nu, dtype=float)
    vx, vy = nu[..., 0], nu[..., 1]
    rho = 0.25 / (n20 * n02 - n11**2)
    dx = z[0] - xc
    dy = z[1] - yc
    return rho * (
        vx**2 * n02
        + vy**2 * n20
        + 2 * vx * vy * n11
        + 2 * (n02 * vx - n11 * vy) * dx
        + 2 * (n20 * vy - n11 * vx) * dy
    )
