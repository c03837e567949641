"""Spaces with a group translation and dilations: ``m(B_r(x)) = c r^N`` for all x.

Euclidean space, finite-dimensional normed spaces and the first Heisenberg
group share the polar sampler implemented here: a direction drawn from the
cone measure of the unit sphere, dilated by a radius with density
``proportional to t^(N-1)``, then translated to the center.
"""

from __future__ import annotations

import numpy as np

from ..errors import StateError, UsageError
from .base import MetricMeasureSpace


class DilationSpace(MetricMeasureSpace):
    homogeneous = True

    # subclasses provide: _dist, _translate,
    # _dilate, _sphere (cone-measure directions), unit_ball_volume
    unit_ball_volume = None

    def _require_volume(self):
        if self.unit_ball_volume is None:
            raise StateError(f"{self.kind}: unit-ball volume not calibrated")
        return self.unit_ball_volume

    def power_model(self, x=None):
        return self._require_volume(), self.volume_dimension

    def ball_volume(self, r, x=None):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise UsageError("radius must be nonnegative")
        return self._require_volume() * r**self.volume_dimension

    def ball_volume_derivative(self, r, x=None):
        n = self.volume_dimension
        return self._require_volume() * n * np.asarray(r, dtype=float) ** (n - 1)

    def _radii(self, r1, r2, m, rng):
        n = self.volume_dimension
        lo, hi = r1**n, r2**n
        return (lo + rng.random(m) * (hi - lo)) ** (1.0 / n)

    def sample_annulus(self, centers, r1, r2, rng):
        centers = np.asarray(centers, dtype=float)
        m = centers.shape[0]
        t = self._radii(r1, r2, m, rng)
        z = self._dilate(self._sphere(m, rng), t)
        measure = self._require_volume() * (r2**self.volume_dimension - r1**self.volume_dimension)
        return self._translate(centers, z), t, measure, np.ones(m, dtype=bool)

    def sample_ball(self, center, r, n, rng):
        center = np.broadcast_to(np.asarray(center, dtype=float), (n, self.dim))
        pts, _, measure, _ = self.sample_annulus(center, 0.0, r, rng)
        return pts, measure


class Euclidean(DilationSpace):
    """``(R^N, |.|, Lebesgue)``."""

    kind = "euclidean"

    def __init__(self, n):
        n = int(n)
        if n < 1:
            raise UsageError("Euclidean dimension must be >= 1")
        self.dim = n
        super().__init__(n, np.zeros(n))
        self.unit_ball_volume = unit_ball_volume(n)

    def _dist(self, x, y):
        return np.linalg.norm(x - y, axis=-1)

    def _translate(self, x, z):
        return x + z

    def _dilate(self, z, t):
        return z * np.asarray(t)[..., None]

    def _sphere(self, m, rng):
        g = rng.standard_normal((m, self.dim))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def describe(self):
        return {"kind": self.kind, "dimension": self.dim}


class Banach(DilationSpace):
    """``(R^N, gauge, Lebesgue)`` for a symmetric convex gauge."""

    kind = "banach"

    def __init__(self, gauge):
        self.gauge = gauge
        self.dim = gauge.dim
        super().__init__(gauge.dim, np.zeros(gauge.dim))
        self.unit_ball_volume = gauge.unit_ball_volume

    def _dist(self, x, y):
        return self.gauge(x - y)

    def _translate(self, x, z):
        return x + z

    def _dilate(self, z, t):
        return z * np.asarray(t)[..., None]

    def _sphere(self, m, rng):
        from .base import rejection

        low, high = self.gauge.bounding_box()

        def propose(k):
            return low + (high - low) * rng.random((k, self.dim))

        def accept(w):
            g = self.gauge(w)
            return (g <= 1.0) & (g > 1e-12)

        w, _ = rejection(propose, accept, m)
        return w / self.gauge(w)[:, None]

    def describe(self):
        return {"kind": self.kind, "dimension": self.dim, "gauge": self.gauge.describe()}


def unit_ball_volume(n):
    """Lebesgue measure of the Euclidean unit ball in ``R^n``."""
    from scipy.special import gammaln

    return float(np.exp(0.5 * n * np.log(np.pi) - gammaln(0.5 * n + 1)))


def sphere_area(n):
    """``|S^{n-1}| = n * omega_n``."""
    return n * unit_ball_volume(n)
