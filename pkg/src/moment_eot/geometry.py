"""Ellipses expressed through normalized centered second-order moments.

An ellipse with semi-axes ``a1 >= a2`` and orientation ``alpha`` has the
moment matrix ``N = R(alpha) diag(a1^2/4, a2^2/4) R(alpha)^T`` whose entries
are ``[[n20, n11], [n11, n02]]``. The triple ``(n11, n20, n02)`` together with
the centroid is the shape part of every tracker state in this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# relative thresholds, see moments_to_ellipse
DEGENERATE_N11 = 1e-12
MIN_DETERMINANT = 1e-12


class GeometryError(ValueError):
    """Raised when a moment triple does not describe a proper ellipse."""


@dataclass(frozen=True)
class MomentVector:
    """Normalized centered moments ``(n11, n20, n02)`` of an elliptic region."""

    n11: float
    n20: float
    n02: float

    @classmethod
    def from_array(cls, values) -> "MomentVector":
        n11, n20, n02 = (float(v) for v in values)
        return cls(n11, n20, n02)

    def as_array(self) -> np.ndarray:
        return np.array([self.n11, self.n20, self.n02])

    def matrix(self) -> np.ndarray:
        return np.array([[self.n20, self.n11], [self.n11, self.n02]])

    @property
    def determinant(self) -> float:
        return self.n20 * self.n02 - self.n11**2

    def is_valid(self) -> bool:
        return moments_valid(self.n11, self.n20, self.n02)


@dataclass(frozen=True)
class EllipseShape:
    """Ellipse given by semi-axes, orientation of the major axis and centroid."""

    a1: float
    a2: float
    alpha: float = 0.0
    centroid: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.a1 >= self.a2 > 0):
            raise GeometryError(f"need a1 >= a2 > 0, got a1={self.a1}, a2={self.a2}")
        object.__setattr__(self, "alpha", normalize_orientation(self.alpha))
        object.__setattr__(self, "centroid", (float(self.centroid[0]), float(self.centroid[1])))

    @classmethod
    def from_axes(cls, u: float, v: float, alpha: float = 0.0, centroid=(0.0, 0.0)) -> "EllipseShape":
        """Build an ellipse from two semi-axes in any order.

        ``u`` lies along ``alpha``; when ``u < v`` the major axis is the
        perpendicular one and the orientation is shifted by a quarter turn.
        """
        if u >= v:
            return cls(u, v, alpha, centroid)
        return cls(v, u, alpha + np.pi / 2, centroid)

    @property
    def area(self) -> float:
        return float(np.pi * self.a1 * self.a2)

    def boundary(self, n_vertices: int = 720) -> np.ndarray:
        """Vertices of the inscribed polygon, counter-clockwise, shape ``(n, 2)``."""
        phi = np.linspace(0.0, 2 * np.pi, n_vertices, endpoint=False)
        c, s = np.cos(self.alpha), np.sin(self.alpha)
        u = self.a1 * np.cos(phi)
        v = self.a2 * np.sin(phi)
        return np.column_stack(
            [self.centroid[0] + c * u - s * v, self.centroid[1] + s * u + c * v]
        )


@dataclass(frozen=True)
class ExtendedState:
    """Moments, centroid position, centroid velocity and turn rate of a target."""

    moments: MomentVector
    pos: tuple[float, float]
    vel: tuple[float, float] = (0.0, 0.0)
    omega: float = 0.0

    def to_vector(self) -> np.ndarray:
        """Filter state ordering ``[n11, n20, n02, x, vx, y, vy, omega]``."""
        return np.array(
            [
                self.moments.n11,
                self.moments.n20,
                self.moments.n02,
                self.pos[0],
                self.vel[0],
                self.pos[1],
                self.vel[1],
                self.omega,
            ]
        )

    @classmethod
    def from_vector(cls, x) -> "ExtendedState":
        x = np.asarray(x, dtype=float)
        return cls(
            MomentVector.from_array(x[:3]),
            (float(x[3]), float(x[5])),
            (float(x[4]), float(x[6])),
            float(x[7]) if x.size > 7 else 0.0,
        )

    def ellipse(self) -> EllipseShape:
        a1, a2, alpha = moments_to_ellipse(self.moments)
        return EllipseShape(a1, a2, alpha, self.pos)


def normalize_orientation(alpha: float) -> float:
    """Map an axis orientation onto ``(-pi/2, pi/2]``."""
    a = float(np.mod(alpha + np.pi / 2, np.pi) - np.pi / 2)
    if a <= -np.pi / 2:
        a += np.pi
    return a


def moments_valid(n11: float, n20: float, n02: float) -> bool:
    det = n20 * n02 - n11**2
    return n20 > 0 and n02 > 0 and det > MIN_DETERMINANT * (n20 + n02) ** 2


def project_moments(n11: float, n20: float, n02: float, floor: float = 1e-3) -> tuple[float, float, float]:
    """Nearest proper moment triple, with eigenvalues clipped at ``floor * trace``.

    Valid triples are returned unchanged. A non-positive trace has no
    meaningful projection and raises :class:`GeometryError`.
    """
    if moments_valid(n11, n20, n02):
        return n11, n20, n02
    tr = n20 + n02
    if not tr > 0:
        raise GeometryError(f"moment matrix with trace {tr!r} cannot be projected onto an ellipse")
    vals, vecs = np.linalg.eigh(np.array([[n20, n11], [n11, n02]]))
    N = (vecs * np.maximum(vals, floor * tr)) @ vecs.T
    return float(N[0, 1]), float(N[0, 0]), float(N[1, 1])


def _as_moments(m) -> MomentVector:
    if isinstance(m, MomentVector):
        return m
    return MomentVector.from_array(m)


def moments_to_ellipse(m) -> tuple[float, float, float]:
    """Semi-axes and orientation ``(a1, a2, alpha)`` of a moment triple.

    The orientation is the angle of the major axis. It equals ``arctan(t)``
    with ``t = (n02 - n20 + root) / (2 n11)``; when ``n11`` is negligible the
    ellipse is axis aligned and ``alpha`` is 0 or ``pi/2``.
    """
    m = _as_moments(m)
    if not m.is_valid():
        raise GeometryError(f"moment matrix is not positive definite: {m}")
    trace = m.n20 + m.n02
    root = np.hypot(m.n20 - m.n02, 2 * m.n11)
    a1 = np.sqrt(2 * (trace + root))
    # a1^2 a2^2 = 16 det; avoids cancellation in trace - root
    a2 = min(4 * np.sqrt(m.determinant) / a1, a1)
    if abs(m.n11) < DEGENERATE_N11 * trace:
        alpha = 0.0 if m.n20 >= m.n02 else np.pi / 2
    else:
        alpha = normalize_orientation(0.5 * np.arctan2(2 * m.n11, m.n20 - m.n02))
    return float(a1), float(a2), float(alpha)


def ellipse_to_moments(e: EllipseShape) -> MomentVector:
    c2, s2 = np.cos(e.alpha) ** 2, np.sin(e.alpha) ** 2
    a1s, a2s = e.a1**2, e.a2**2
    return MomentVector(
        n11=float((a1s - a2s) * np.sin(2 * e.alpha) / 8),
        n20=float((a1s * c2 + a2s * s2) / 4),
        n02=float((a1s * s2 + a2s * c2) / 4),
    )


def implicit_value(points, state) -> np.ndarray | float:
    """Squared scale ``s^2`` of the scaled ellipse through each point.

    ``points`` is a single 2D point or an ``(n, 2)`` array. ``state`` is an
    :class:`ExtendedState` or a filter state vector.
    """
    if isinstance(state, ExtendedState):
        n11, n20, n02 = state.moments.n11, state.moments.n20, state.moments.n02
        xc, yc = state.pos
    else:
        x = np.asarray(state, dtype=float)
        n11, n20, n02, xc, yc = x[0], x[1], x[2], x[3], x[5]
    pts = np.asarray(points, dtype=float)
    dx = pts[..., 0] - xc
    dy = pts[..., 1] - yc
    rho = 1.0 / (4 * (n20 * n02 - n11**2))
    return rho * (n02 * dx**2 + n20 * dy**2 - 2 * n11 * dx * dy)


def area(m) -> float:
    m = _as_moments(m)
    return float(4 * np.pi * np.sqrt(m.determinant))


def contains(e: EllipseShape, points) -> np.ndarray | bool:
    m = ellipse_to_moments(e)
    state = ExtendedState(m, e.centroid)
    return implicit_value(points, state) <= 1.0 + 1e-12
