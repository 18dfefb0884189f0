"""Constant-velocity and coordinated-turn prediction of the extended state.

All filters share the 8-dimensional state

    [n11, n20, n02, x, vx, y, vy, omega]

The CV model keeps the moments constant and carries ``omega`` as an inert
entry; the CT model rotates the moments with the exact transition matrix of
the moment ODE and the centroid with the standard coordinated-turn matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .geometry import project_moments
from .ukf import GaussianBelief, UtParams, symmetrize, unscented_transform

STATE_DIM = 8
MOMENTS = slice(0, 3)
POS = [3, 5]
VEL = [4, 6]
OMEGA = 7

# below this |omega| T the CT kinematics use the omega -> 0 series
SMALL_TURN = 1e-8
# variance added to the inert omega entry of the CV model
OMEGA_FLOOR = 1e-12


@dataclass(frozen=True)
class CvNoiseParams:
    """White-noise-acceleration density ``q`` and moment noise ``c_im`` (3x3)."""

    q: float
    c_im: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        c_im = np.asarray(self.c_im, dtype=float)
        if c_im.ndim == 1:
            c_im = np.diag(c_im)
        if self.q < 0:
            raise ValueError("q must be non-negative")
        if c_im.shape != (3, 3) or not np.allclose(c_im, c_im.T):
            raise ValueError("c_im must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(c_im).min() < -1e-12 * max(1.0, np.trace(c_im)):
            raise ValueError("c_im must be positive semidefinite")
        object.__setattr__(self, "c_im", c_im)


@dataclass(frozen=True)
class CtNoiseParams:
    """Variances of the six process noises ``[m, m, m, ax, ay, turn]``."""

    w_var: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w_var, dtype=float).reshape(-1)
        if w.shape != (6,) or np.any(w < 0):
            raise ValueError("w_var must be six non-negative variances")
        object.__setattr__(self, "w_var", w)

    @property
    def cov(self) -> np.ndarray:
        return np.diag(self.w_var)


def white_noise_block(T: float, q: float) -> np.ndarray:
    return q * np.array([[T**3 / 3, T**2 / 2], [T**2 / 2, T]])


def cv_transition(T: float, params: CvNoiseParams) -> tuple[np.ndarray, np.ndarray]:
    """Transition and process covariance of the 7-state CV model.

    State order is ``[n11, n20, n02, x, vx, y, vy]``.
    """
    A = np.array([[1.0, T, 0, 0], [0, 1, 0, 0], [0, 0, 1, T], [0, 0, 0, 1]])
    F = block_diag(np.eye(3), A)
    Cw = white_noise_block(T, params.q)
    C = block_diag(params.c_im, Cw, Cw)
    return F, C


def cv_transition_full(T: float, params: CvNoiseParams) -> tuple[np.ndarray, np.ndarray]:
    """CV transition embedded in the common 8-state with an inert turn rate."""
    F7, C7 = cv_transition(T, params)
    return block_diag(F7, 1.0), block_diag(C7, OMEGA_FLOOR)


def ct_moment_transition(omega: float, tau: float) -> np.ndarray:
    """Exact 3x3 transition of ``(n11, n20, n02)`` under rotation at ``omega``."""
    th = omega * tau
    c2, s2 = np.cos(2 * th), np.sin(2 * th)
    cc, ss = np.cos(th) ** 2, np.sin(th) ** 2
    return np.array(
        [
            [c2, 0.5 * s2, -0.5 * s2],
            [-s2, cc, ss],
            [s2, ss, cc],
        ]
    )


def ct_kinematic_matrix(omega: float, T: float) -> np.ndarray:
    """Coordinated-turn matrix over ``[x, vx, y, vy, omega]``."""
    wt = omega * T
    c, s = np.cos(wt), np.sin(wt)
    if abs(wt) < SMALL_TURN:
        # sin(wT)/w -> T - w^2 T^3/6, (1 - cos(wT))/w -> w T^2 / 2
        sw = T - omega**2 * T**3 / 6
        cw = omega * T**2 / 2
    else:
        sw = s / omega
        cw = (1 - c) / omega
    return np.array(
        [
            [1.0, sw, 0, -cw, 0],
            [0, c, 0, -s, 0],
            [0, cw, 1, sw, 0],
            [0, s, 0, c, 0],
            [0, 0, 0, 0, 1],
        ]
    )


def ct_noise_gain(T: float) -> np.ndarray:
    g = np.array(
        [
            [T**2 / 2, 0, 0],
            [T, 0, 0],
            [0, T**2 / 2, 0],
            [0, T, 0],
            [0, 0, T],
        ]
    )
    return block_diag(np.eye(3), g)


def ct_transition(state, T: float) -> tuple[np.ndarray, np.ndarray]:
    """``F_CT`` (8x8) and noise gain ``Gamma`` (8x6) at the state's turn rate."""
    omega = float(np.asarray(state.to_vector() if hasattr(state, "to_vector") else state)[OMEGA])
    F = block_diag(ct_moment_transition(omega, T), ct_kinematic_matrix(omega, T))
    return F, ct_noise_gain(T)


def ct_propagate(x: np.ndarray, w: np.ndarray, T: float) -> np.ndarray:
    """Propagate a batch of states ``x`` (k, 8) with noises ``w`` (k, 6)."""
    x = np.atleast_2d(x)
    w = np.atleast_2d(w)
    omega = x[:, OMEGA]
    th = omega * T
    c2, s2 = np.cos(2 * th), np.sin(2 * th)
    cc, ss = np.cos(th) ** 2, np.sin(th) ** 2
    n11, n20, n02 = x[:, 0], x[:, 1], x[:, 2]
    out = np.empty_like(x)
    out[:, 0] = c2 * n11 + 0.5 * s2 * (n20 - n02)
    out[:, 1] = -s2 * n11 + cc * n20 + ss * n02
    out[:, 2] = s2 * n11 + ss * n20 + cc * n02

    c, s = np.cos(th), np.sin(th)
    small = np.abs(th) < SMALL_TURN
    safe = np.where(small, 1.0, omega)
    sw = np.where(small, T - omega**2 * T**3 / 6, s / safe)
    cw = np.where(small, omega * T**2 / 2, (1 - c) / safe)
    px, vx, py, vy = x[:, 3], x[:, 4], x[:, 5], x[:, 6]
    out[:, 3] = px + sw * vx - cw * vy
    out[:, 4] = c * vx - s * vy
    out[:, 5] = py + cw * vx + sw * vy
    out[:, 6] = s * vx + c * vy
    out[:, 7] = omega
    return out + w @ ct_noise_gain(T).T


def predict_cv(belief, params: CvNoiseParams, T: float):
    """Closed-form linear prediction ``F x``, ``F C F^T + Q``."""
    F, Q = cv_transition_full(T, params)
    return GaussianBelief(F @ belief.mean, symmetrize(F @ belief.cov @ F.T + Q))


def predict_ct(belief, params: CtNoiseParams, T: float, ut=None):
    """Unscented prediction over the state augmented with the six process noises."""
    ut = ut or UtParams()
    d = belief.dim
    aug_mean = np.concatenate([belief.mean, np.zeros(6)])
    aug_cov = block_diag(belief.cov, params.cov)
    res = unscented_transform(
        GaussianBelief(aug_mean, aug_cov),
        ut,
        lambda pts: ct_propagate(pts[:, :d], pts[:, d:], T),
        vectorized=True,
    )
    # with omega correlated to the moments the averaged rotation can leave
    # the cone of proper ellipses
    mean = res.mean.copy()
    if mean[1] + mean[2] > 0:
        mean[MOMENTS] = project_moments(*mean[MOMENTS])
    return GaussianBelief(mean, res.cov)


def predict(belief, model: str, params, T: float, ut=None):
    """Dispatch to :func:`predict_cv` or :func:`predict_ct` by model name."""
    model = model.upper()
    if model == "CV":
        return predict_cv(belief, params, T)
    if model == "CT":
        return predict_ct(belief, params, T, ut)
    raise ValueError(f"unknown motion model {model!r}")
