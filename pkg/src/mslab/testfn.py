"""Test functions ``u(x) = A * phi(d(x, c))`` built from the distance to a center.

Every function is a radial profile of the space's own distance, so the same
code serves Euclidean, normed, Heisenberg, hyperbolic and sector spaces, and
``||u||_p^p`` reduces to a one-dimensional layer-cake integral against the
ball-volume model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, UsageError
from .quadrature import Estimate
from .rng import stream

# the gaussian is treated as supported where exp(-(d/R)^2) >= 1e-16
GAUSS_CUTOFF = float(np.sqrt(np.log(1e16)))
# max |d/dx (1 - x^2)^2| on [0, 1], attained at x = 1/sqrt(3)
BUMP_LIP = 8.0 / (3.0 * np.sqrt(3.0))


@dataclass(frozen=True)
class TestFunction:
    """``amplitude * phi(d(x, center) / radius)`` on ``space``.

    ``kind`` is ``indicator`` (``phi = 1`` on ``[0, 1)``), ``bump``
    (``phi(x) = (1 - x^2)^2`` on ``[0, 1]``) or ``gaussian``
    (``phi(x) = exp(-x^2)``).
    """

    __test__ = False  # not a pytest class

    space: object
    kind: str
    radius: float = 1.0
    center: np.ndarray | None = None
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("indicator", "bump", "gaussian"):
            raise UsageError(f"unknown test function kind {self.kind!r}")
        if not float(self.radius) > 0:
            raise UsageError("test function radius must be positive")
        c = self.space.basepoint if self.center is None else self.space.validate(self.center)
        object.__setattr__(self, "center", np.asarray(c, dtype=float))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "amplitude", float(self.amplitude))

    @classmethod
    def indicator(cls, space, radius=1.0, center=None, amplitude=1.0):
        return cls(space, "indicator", radius, center, amplitude)

    @classmethod
    def bump(cls, space, radius=1.0, center=None, amplitude=1.0):
        return cls(space, "bump", radius, center, amplitude)

    @classmethod
    def gaussian(cls, space, scale=1.0, center=None, amplitude=1.0):
        return cls(space, "gaussian", scale, center, amplitude)

    def scaled(self, factor):
        return TestFunction(self.space, self.kind, self.radius, self.center, self.amplitude * factor)

    # -- pointwise ------------------------------------------------------------

    def profile(self, d):
        x = np.asarray(d, dtype=float) / self.radius
        if self.kind == "indicator":
            v = (x < 1.0).astype(float)
        elif self.kind == "bump":
            v = np.where(x < 1.0, (1.0 - np.minimum(x, 1.0) ** 2) ** 2, 0.0)
        else:
            v = np.exp(-x * x)
        return self.amplitude * v

    def center_distance(self, pts):
        """``d(center, pts)`` without point validation (internal fast path)."""
        return self.space._dist(self.center, pts)

    def evaluate(self, x):
        """``u(x)``; raises :class:`UsageError` for points not in the space."""
        pts = self.space.validate(x)
        return self.profile(self.center_distance(pts))

    def __call__(self, x):
        return self.evaluate(x)

    @property
    def support_radius(self):
        """Radius of a ball about the center outside which ``u`` vanishes (numerically)."""
        if self.kind == "gaussian":
            return GAUSS_CUTOFF * self.radius
        return self.radius

    @property
    def compact(self):
        return self.kind != "gaussian"

    @property
    def sup(self):
        return abs(self.amplitude)

    @property
    def lipschitz(self):
        if self.kind == "indicator":
            return np.inf
        if self.kind == "bump":
            return abs(self.amplitude) * BUMP_LIP / self.radius
        return abs(self.amplitude) * np.sqrt(2.0) * np.exp(-0.5) / self.radius

    @property
    def total_variation_jump(self):
        """Size of the jump across the support boundary (indicators only)."""
        return abs(self.amplitude) if self.kind == "indicator" else 0.0

    # -- norms ----------------------------------------------------------------

    def analytic_lp(self, p):
        """Closed-form ``||u||_p^p`` when the volume model allows it, else ``None``."""
        p = float(p)
        amp = abs(self.amplitude) ** p
        if self.kind == "indicator":
            return amp * float(self.space.ball_volume(self.radius, self.center))
        model = self.space.power_model(self.center)
        if model is None:
            return None
        c, n = model
        if self.kind == "bump":
            return amp * c * n * self.radius**n * 0.5 * special.beta(0.5 * n, 2.0 * p + 1.0)
        return amp * c * n * 0.5 * special.gamma(0.5 * n) * (self.radius**2 / p) ** (0.5 * n)

    def radial_lp(self, p):
        """``||u||_p^p`` as ``integral of |phi(r)|^p dV(r)`` by adaptive quadrature."""
        p = float(p)

        def integrand(r):
            return abs(float(self.profile(r))) ** p * float(
                self.space.ball_volume_derivative(r, self.center)
            )

        upper = self.support_radius
        val, err = integrate.quad(integrand, 0.0, upper, limit=200, epsabs=0.0, epsrel=1e-11)
        return val, err

    def mc_lp(self, p, samples, seed):
        """Monte Carlo ``||u||_p^p`` over the support ball, checked at two sample sizes."""
        samples = int(samples)
        if samples < 100:
            raise UsageError("Monte Carlo norm needs at least 100 samples")
        ests = []
        for key, n in ((0, samples // 2), (1, samples)):
            rng = stream(seed, 0x1B, key)
            pts, measure = self.space.sample_ball(self.center, self.support_radius, n, rng)
            vals = np.abs(self.profile(self.center_distance(pts))) ** p * measure
            ests.append((vals.mean(), vals.std(ddof=1) / np.sqrt(n), n))
        (v1, s1, _), (v2, s2, n2) = ests
        if not (np.isfinite(v1) and np.isfinite(v2)) or abs(v1 - v2) > 6.0 * np.hypot(s1, s2) + 1e-12:
            raise DivergenceError(
                "L^p norm estimate does not settle between sample sizes",
                half=float(v1),
                full=float(v2),
            )
        return Estimate(float(v2), float(s2), n2, meta={"method": "monte_carlo"})

    def lp_norm(self, p, plan=None, method="auto"):
        """Estimate of ``||u||_p^p``.

        ``method`` is ``auto`` (closed form, else radial quadrature, else Monte
        Carlo), ``analytic``, ``radial`` or ``mc``.  ``plan`` supplies the
        sample count and seed for Monte Carlo.
        """
        p = float(p)
        if not p > 1:
            raise UsageError("p must exceed 1")
        if method in ("auto", "analytic"):
            val = self.analytic_lp(p)
            if val is not None:
                return Estimate(float(val), 0.0, 0, meta={"method": "analytic"})
            if method == "analytic":
                raise UsageError("no closed form for this function on this space")
        if method in ("auto", "radial"):
            try:
                val, err = self.radial_lp(p)
                return Estimate(float(val), float(err), 0, meta={"method": "radial"})
            except NotImplementedError:
                if method == "radial":
                    raise UsageError("space has no ball-volume derivative") from None
        samples = 1 << 16 if plan is None else plan.total_samples
        seed = 0 if plan is None else plan.seed
        return self.mc_lp(p, samples, seed)

    def describe(self):
        return {
            "kind": self.kind,
            "radius": self.radius,
            "center": self.center.tolist(),
            "amplitude": self.amplitude,
        }


def make_test_function(space, desc):
    """Build from a config descriptor (``kind``, ``radius``, ``center``, ``amplitude``)."""
    return TestFunction(
        space,
        desc.get("kind", "bump"),
        desc.get("radius", desc.get("scale", 1.0)),
        desc.get("center"),
        desc.get("amplitude", 1.0),
    )
