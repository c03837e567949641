"""First Heisenberg group with its Carnot-Caratheodory distance.

Group law ``(x, y, t)(x', y', t') = (x + x', y + y', t + t' + (x y' - y x') / 2)``,
so ``t`` is the signed area swept by the horizontal projection of a curve.
Lebesgue measure is the Haar measure and the dilations
``(x, y, t) -> (l x, l y, l^2 t)`` scale it by ``l^4``: the homogeneous
dimension is 4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import NumericalError, UsageError
from ..rng import stream
from .base import rejection
from .dilation import DilationSpace

# largest |t| on the closed unit ball, reached by the half-circle geodesic
T_MAX_UNIT_BALL = 1.0 / (2.0 * np.pi)


def _x_minus_sin(x):
    """``x - sin(x)`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    series = xs * x2 / 6.0 * (1 - x2 / 20.0 * (1 - x2 / 42.0 * (1 - x2 / 72.0 * (1 - x2 / 110.0))))
    return np.where(small, series, x - np.sin(x))


def geodesic_ratio(phi):
    """``(phi - sin phi cos phi) / sin^2 phi``, increasing from 0 to inf on (0, pi)."""
    phi = np.asarray(phi, dtype=float)
    return 0.5 * _x_minus_sin(2.0 * phi) / np.sin(phi) ** 2


@njit(cache=True)
def _ratio_scalar(phi):
    x = 2.0 * phi
    if x < 0.1:
        x2 = x * x
        xm = x * x2 / 6.0 * (1 - x2 / 20.0 * (1 - x2 / 42.0 * (1 - x2 / 72.0 * (1 - x2 / 110.0))))
    else:
        xm = x - np.sin(x)
    s = np.sin(phi)
    return 0.5 * xm / (s * s)


@njit(cache=True, nogil=True)
def _cc_kernel(x, y, t, max_iter, out, width, phis):
    for i in range(x.size):
        rho2 = x[i] * x[i] + y[i] * y[i]
        a = abs(t[i])
        width[i] = 0.0
        phis[i] = 0.0
        if a == 0.0:
            out[i] = np.sqrt(rho2)
            continue
        if rho2 == 0.0:
            out[i] = 2.0 * np.sqrt(np.pi * a)
            continue
        target = 4.0 * a / rho2
        # Newton on log(ratio), which has no pole at pi, safeguarded by a bracket
        log_target = np.log(target)
        lo = 0.0
        hi = np.pi
        phi = 0.5 * np.pi
        step = hi - lo
        for _ in range(max_iter):
            val = _ratio_scalar(phi)
            f = np.log(val) - log_target
            if f == 0.0:
                step = 0.0
                break
            if f < 0.0:
                lo = phi
            else:
                hi = phi
            slope = 2.0 * (1.0 / val - np.cos(phi) / np.sin(phi))
            cand = phi - f / slope if slope > 0.0 else -1.0
            if cand <= lo or cand >= hi:
                cand = 0.5 * (lo + hi)
            step = abs(cand - phi)
            phi = cand
            if step <= 1e-15 * phi or hi - lo <= 1e-15:
                break
        width[i] = min(step, hi - lo)
        phis[i] = phi
        s = np.sin(phi)
        if phi > 0.5 * np.pi:
            # near phi = pi, sin(phi) is tiny; the area form stays well conditioned
            out[i] = 2.0 * phi * np.sqrt(a / (phi - s * np.cos(phi)))
        else:
            out[i] = np.sqrt(rho2) * phi / s


def cc_distance_origin(q, max_iter=64, tol=1e-12):
    """Carnot-Caratheodory distance from the identity to ``q = (x, y, t)``.

    A length-minimizing curve to a point with ``rho = |(x, y)| > 0`` and
    ``t != 0`` projects onto a circular arc over the chord of length ``rho``.
    With ``phi`` half the angle subtended by the arc, the enclosed area fixes
    ``geodesic_ratio(phi) = 4 |t| / rho^2``; this is solved by safeguarded Newton
    iteration on ``(0, pi)`` and the length is ``rho phi / sin(phi)``.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 3:
        raise UsageError(f"Heisenberg points need 3 coordinates, got shape {q.shape}")
    shape = q.shape[:-1]
    flat = q.reshape(-1, 3)
    out = np.empty(flat.shape[0])
    width = np.empty(flat.shape[0])
    phis = np.empty(flat.shape[0])
    _cc_kernel(
        np.ascontiguousarray(flat[:, 0]),
        np.ascontiguousarray(flat[:, 1]),
        np.ascontiguousarray(flat[:, 2]),
        int(max_iter),
        out,
        width,
        phis,
    )
    if width.size and width.max() > tol:
        i = int(np.argmax(width))
        target = 4.0 * abs(flat[i, 2]) / (flat[i, 0] ** 2 + flat[i, 1] ** 2)
        raise NumericalError(
            "CC geodesic parameter did not converge",
            bracket_width=float(width[i]),
            residual=float(abs(geodesic_ratio(phis[i]) - target) / target),
            iterations=int(max_iter),
            point=flat[i].tolist(),
        )
    return out.reshape(shape)


def group_mul(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = p + q
    out[..., 2] += 0.5 * (p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0])
    return out


def group_inv(p):
    return -np.asarray(p, dtype=float)


def dilate(q, lam):
    q = np.asarray(q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = q * lam[..., None]
    out[..., 2] *= lam
    return out


@dataclass(frozen=True)
class Calibration:
    value: float
    stderr: float
    samples: int
    acceptance: float


class Heisenberg(DilationSpace):
    """``(H^1, d_cc, Lebesgue)``; ball volumes are ``c r^4`` once ``c`` is calibrated."""

    kind = "heisenberg"
    dim = 3
    box = np.array([1.0, 1.0, T_MAX_UNIT_BALL])

    def __init__(self, unit_ball_volume=None):
        super().__init__(4, np.zeros(3))
        self.unit_ball_volume = None if unit_ball_volume is None else float(unit_ball_volume)
        self.calibration = None

    def _dist(self, p, q):
        return cc_distance_origin(group_mul(group_inv(p), q))

    def _translate(self, x, z):
        return group_mul(x, z)

    def _dilate(self, z, t):
        return dilate(z, t)

    def _unit_ball_points(self, m, rng):
        box = self.box

        def propose(k):
            return (2.0 * rng.random((k, 3)) - 1.0) * box

        def accept(w):
            d = cc_distance_origin(w)
            return (d < 1.0) & (d > 1e-12)

        return rejection(propose, accept, m)[0]

    def _sphere(self, m, rng):
        w = self._unit_ball_points(m, rng)
        return dilate(w, 1.0 / cc_distance_origin(w))

    def calibrate_unit_ball(self, samples, seed, chunk=1 << 18):
        """Monte Carlo estimate of the Lebesgue measure of the unit CC ball.

        Points are drawn uniformly in a box containing the ball; the hit
        fraction times the box volume is the estimate, with binomial standard
        error.  The value is stored as the space's ball-volume constant.
        """
        samples = int(samples)
        if samples < 10_000:
            raise UsageError("calibration needs at least 10^4 samples")
        hits = 0
        done = 0
        block = 0
        while done < samples:
            m = min(chunk, samples - done)
            rng = stream(seed, 0xCA11B, block)
            w = (2.0 * rng.random((m, 3)) - 1.0) * self.box
            hits += int(np.count_nonzero(cc_distance_origin(w) < 1.0))
            done += m
            block += 1
        box_volume = float(np.prod(2.0 * self.box))
        frac = hits / samples
        value = box_volume * frac
        stderr = box_volume * np.sqrt(frac * (1.0 - frac) / samples)
        self.unit_ball_volume = value
        self.calibration = Calibration(value, float(stderr), samples, frac)
        return self.calibration

    def describe(self):
        out = {"kind": self.kind, "unit_ball_volume": self.unit_ball_volume}
        if self.calibration is not None:
            out["calibration_samples"] = self.calibration.samples
            out["calibration_stderr"] = self.calibration.stderr
        return out
