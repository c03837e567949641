"""The hyperbolic plane (curvature -1) in the Poincare disk model."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from .base import MetricMeasureSpace


def disk_distance(x, y):
    """``2 asinh(|x - y| / sqrt((1 - |x|^2)(1 - |y|^2)))``."""
    nx = 1.0 - np.sum(x * x, axis=-1)
    ny = 1.0 - np.sum(y * y, axis=-1)
    diff = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    return 2.0 * np.arcsinh(diff / np.sqrt(nx * ny))


def mobius_add(a, z):
    """Isometry of the disk sending 0 to ``a``: ``(z + a) / (1 + conj(a) z)``."""
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    ac = a[..., 0] + 1j * a[..., 1]
    zc = z[..., 0] + 1j * z[..., 1]
    w = (zc + ac) / (1.0 + np.conj(ac) * zc)
    return np.stack([w.real, w.imag], axis=-1)


class HyperbolicPlane(MetricMeasureSpace):
    """Poincare disk with area element ``4 / (1 - |z|^2)^2``.

    Balls have area ``2 pi (cosh r - 1)`` about every point.  Points farther
    than about 36 from the origin are not representable in double precision,
    which is irrelevant for the bounded supports used here; volumes come from
    the closed form, never from coordinates.
    """

    kind = "hyperbolic"
    dim = 2

    def __init__(self):
        super().__init__(2, np.zeros(2))

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.all(np.isfinite(pts), axis=-1) & (np.sum(pts * pts, axis=-1) < 1.0)

    def _dist(self, x, y):
        return disk_distance(x, y)

    def ball_volume(self, r, x=None):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise UsageError("radius must be nonnegative")
        return 4.0 * np.pi * np.sinh(0.5 * r) ** 2

    def log_ball_volume(self, r, x=None):
        r = np.asarray(r, dtype=float)
        # log sinh(u) = u - log 2 + log1p(-exp(-2u)) stays finite for large r
        half = 0.5 * r
        log_sinh = half - np.log(2.0) + np.log1p(-np.exp(-2.0 * half))
        return np.log(4.0 * np.pi) + 2.0 * log_sinh

    def ball_volume_derivative(self, r, x=None):
        return 2.0 * np.pi * np.sinh(np.asarray(r, dtype=float))

    def point_at(self, r, angle=0.0):
        """Disk point at hyperbolic distance ``r`` from the origin."""
        rho = np.tanh(0.5 * np.asarray(r, dtype=float))
        return np.stack([rho * np.cos(angle), rho * np.sin(angle)], axis=-1)

    def sample_annulus(self, centers, r1, r2, rng):
        centers = np.asarray(centers, dtype=float)
        m = centers.shape[0]
        # cosh(t) - 1 = 2 sinh^2(t/2) is uniform under the area measure
        u1, u2 = 2.0 * np.sinh(0.5 * r1) ** 2, 2.0 * np.sinh(0.5 * r2) ** 2
        u = u1 + rng.random(m) * (u2 - u1)
        t = 2.0 * np.arcsinh(np.sqrt(0.5 * u))
        angle = 2.0 * np.pi * rng.random(m)
        z = self.point_at(t, angle)
        measure = 2.0 * np.pi * (u2 - u1)
        return mobius_add(centers, z), t, measure, np.ones(m, dtype=bool)

    def sample_ball(self, center, r, n, rng):
        center = np.broadcast_to(np.asarray(center, dtype=float), (n, 2))
        pts, _, measure, _ = self.sample_annulus(center, 0.0, r, rng)
        return pts, measure
