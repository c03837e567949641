"""Flat sector (wedge) of opening angle theta <= pi with apex at the origin.

The wedge is convex, so its intrinsic distance is the Euclidean one.  Balls
about the apex have area ``theta r^2 / 2``; about any other point the area
is computed exactly by integrating in polar coordinates around that point,
``1/2 * integral of min(r, l(phi))^2 dphi``, where ``l(phi)`` is the distance
to the wedge boundary along direction ``phi``.
"""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from .base import MetricMeasureSpace, rejection

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
_TWO_PI = 2.0 * np.pi


class Sector(MetricMeasureSpace):
    kind = "sector"
    dim = 2
    homogeneous = False

    def __init__(self, theta):
        theta = float(theta)
        if not 0 < theta <= np.pi:
            raise UsageError("sector angle must lie in (0, pi] (convex wedge)")
        super().__init__(2, np.zeros(2))
        self.theta = theta
        # inward unit normals of the two edges
        self.normals = np.array([[0.0, 1.0], [np.sin(theta), -np.cos(theta)]])
        self._normal_angles = np.arctan2(self.normals[:, 1], self.normals[:, 0])

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        scale = 1e-12 * (1.0 + np.sqrt(np.sum(pts * pts, axis=-1)))
        side = pts @ self.normals.T
        return np.all(np.isfinite(pts), axis=-1) & np.all(side >= -scale[..., None], axis=-1)

    def _dist(self, x, y):
        return np.linalg.norm(x - y, axis=-1)

    def angle(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.arctan2(pts[..., 1], pts[..., 0])

    # -- polar machinery around an interior point --------------------------

    def boundary_distance(self, x, phi):
        """Distance from ``x`` to the wedge boundary along direction ``phi``."""
        x = np.asarray(x, dtype=float)
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        nx = self.normals @ x
        nu = u @ self.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            li = np.where(nu < 0, -nx / nu, np.inf)
        return np.min(np.maximum(li, 0.0), axis=-1)

    def _breakpoints(self, x, radii):
        nx = self.normals @ x
        pts = [0.0, _TWO_PI]
        for alpha, c in zip(self._normal_angles, nx):
            pts += [alpha + 0.5 * np.pi, alpha - 0.5 * np.pi]
            for a in radii:
                if a > 0 and c <= a:
                    w = np.arccos(np.clip(-c / a, -1.0, 1.0))
                    pts += [alpha + w, alpha - w]
        if np.any(x != 0):
            pts.append(np.arctan2(-x[1], -x[0]))
        pts = np.mod(np.asarray(pts), _TWO_PI)
        pts = np.unique(np.concatenate([pts, [0.0, _TWO_PI]]))
        return pts

    def polar_integral(self, x, g, radii=()):
        """``integral over [0, 2 pi) of g(l(phi)) dphi`` with exact piece splits.

        ``radii`` lists the values ``a`` at which ``g`` has a kink in ``l``
        (e.g. ``min(r, l)``); directions with ``l(phi) = a`` become breakpoints.
        """
        x = np.asarray(x, dtype=float)
        edges = self._breakpoints(x, radii)
        lo, hi = edges[:-1], edges[1:]
        keep = hi - lo > 1e-15
        lo, hi = lo[keep], hi[keep]
        half = 0.5 * (hi - lo)
        phi = (0.5 * (hi + lo))[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = g(self.boundary_distance(x, phi))
        return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * vals))

    # -- volumes ------------------------------------------------------------

    def power_model(self, x=None):
        if self.is_basepoint(x):
            return 0.5 * self.theta, 2.0
        return None

    def ball_volume(self, r, x=None):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise UsageError("radius must be nonnegative")
        if self.is_basepoint(x):
            return 0.5 * self.theta * r**2
        x = self.validate(x)
        flat = [
            self.polar_integral(x, lambda l, a=a: 0.5 * np.minimum(a, l) ** 2, (a,))
            for a in np.ravel(r)
        ]
        return np.reshape(flat, r.shape)

    def ball_volume_derivative(self, r, x=None):
        r = np.asarray(r, dtype=float)
        if self.is_basepoint(x):
            return self.theta * r
        x = self.validate(x)
        flat = [
            self.polar_integral(x, lambda l, a=a: a * (l > a), (a,)) for a in np.ravel(r)
        ]
        return np.reshape(flat, r.shape)

    # -- sampling -------------------------------------------------------------

    def sample_annulus(self, centers, r1, r2, rng):
        centers = np.asarray(centers, dtype=float)
        m = centers.shape[0]
        t = np.sqrt(r1 * r1 + rng.random(m) * (r2 * r2 - r1 * r1))
        ang = _TWO_PI * rng.random(m)
        y = centers + t[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        return y, t, np.pi * (r2 * r2 - r1 * r1), self.contains(y)

    def sample_ball(self, center, r, n, rng):
        if self.is_basepoint(center):
            rad = r * np.sqrt(rng.random(n))
            ang = self.theta * rng.random(n)
            pts = rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
            return pts, 0.5 * self.theta * r * r
        center = np.asarray(center, dtype=float)

        def propose(k):
            t = r * np.sqrt(rng.random(k))
            ang = _TWO_PI * rng.random(k)
            return center + t[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

        pts, _ = rejection(propose, self.contains, n)
        return pts, float(self.ball_volume(r, center))

    def describe(self):
        return {"kind": self.kind, "theta": self.theta}
