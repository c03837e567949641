"""Common interface of the concrete metric measure spaces."""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError, UsageError

# rejection samplers give up when fewer than this fraction of proposals land
MIN_ACCEPTANCE = 1e-4
MAX_PROPOSAL_ROUNDS = 64


class MetricMeasureSpace:
    """A metric measure space ``(X, d, m)`` with a designated basepoint.

    Points are numpy arrays whose last axis holds the coordinates; every
    method is vectorized over the leading axes.  Subclasses are immutable once
    constructed (Heisenberg additionally stores its calibrated unit-ball
    volume, set exactly once).
    """

    kind = "abstract"
    dim = 0
    homogeneous = True

    def __init__(self, volume_dimension, basepoint):
        self.volume_dimension = float(volume_dimension)
        self.basepoint = np.asarray(basepoint, dtype=float)

    # -- points -----------------------------------------------------------

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.all(np.isfinite(pts), axis=-1)

    def validate(self, pts):
        """Return ``pts`` as a float array or raise :class:`UsageError`."""
        arr = np.asarray(pts, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dim:
            raise UsageError(
                f"{self.kind} points need {self.dim} coordinates, got shape {arr.shape}"
            )
        if not np.all(self.contains(arr)):
            raise UsageError(f"point outside {self.kind}: {arr}")
        return arr

    # -- geometry ---------------------------------------------------------

    def distance(self, x, y):
        """``d(x, y)``; raises :class:`UsageError` for points of the wrong kind."""
        return self._dist(self.validate(x), self.validate(y))

    def _dist(self, x, y):
        raise NotImplementedError

    def ball_volume(self, r, x=None):
        """``m(B_r(x))``; ``x`` defaults to the basepoint."""
        raise NotImplementedError

    def log_ball_volume(self, r, x=None):
        return np.log(self.ball_volume(r, x))

    def ball_volume_derivative(self, r, x=None):
        """``d/dr m(B_r(x))``; used for layer-cake integrals and bias bounds."""
        raise NotImplementedError

    def power_model(self, x=None):
        """``(c, N)`` when ``m(B_r(x)) = c r^N`` for every ``r``, else ``None``."""
        return None

    def is_basepoint(self, x):
        return x is None or np.allclose(np.asarray(x, dtype=float), self.basepoint)

    # -- sampling ---------------------------------------------------------

    def sample_ball(self, center, r, n, rng):
        """Draw ``n`` points from ``m`` restricted to ``B_r(center)``.

        Returns ``(points, measure)`` where ``measure = m(B_r(center))``.
        """
        raise NotImplementedError

    def sample_annulus(self, centers, r1, r2, rng):
        """Draw one point per center from the annulus ``r1 < d <= r2``.

        Returns ``(points, distances, measure, inside)``.  ``measure`` is the
        measure of the proposal annulus; ``inside`` masks proposals that fall
        outside the space (always true for spaces without boundary), so
        ``measure * mean(f * inside)`` estimates the annulus integral.
        """
        raise NotImplementedError

    def sample_region(self, region, rng, size=1):
        """Sample ``size`` points from a region of the space.

        ``region`` is a dict with ``type`` one of ``ball`` (``center``, ``r``),
        ``annulus`` (``center``, ``r1``, ``r2``) or ``box`` (``low``, ``high``).
        Returns ``(points, weight)`` with ``weight`` the region's measure.
        """
        kind = region.get("type")
        if kind == "ball":
            center = self.validate(region.get("center", self.basepoint))
            r = _positive(region["r"], "r")
            return self.sample_ball(center, r, size, rng)
        if kind == "annulus":
            center = self.validate(region.get("center", self.basepoint))
            r1, r2 = float(region["r1"]), _positive(region["r2"], "r2")
            if not 0 <= r1 < r2:
                raise UsageError("annulus needs 0 <= r1 < r2")
            return self._rejection_annulus(center, r1, r2, size, rng)
        if kind == "box":
            low = np.asarray(region["low"], dtype=float)
            high = np.asarray(region["high"], dtype=float)
            if low.shape != (self.dim,) or high.shape != (self.dim,) or np.any(high <= low):
                raise UsageError("box needs low < high with one entry per coordinate")
            pts, frac = rejection(
                lambda m: low + (high - low) * rng.random((m, self.dim)),
                self.contains,
                size,
            )
            return pts, float(np.prod(high - low)) * frac
        raise UsageError(f"unknown region type {kind!r}")

    def _rejection_annulus(self, center, r1, r2, size, rng):
        out, weight = [], None
        got = 0
        rounds = 0
        while got < size:
            m = max(2 * (size - got), 64)
            pts, _, measure, inside = self.sample_annulus(
                np.broadcast_to(center, (m, self.dim)), r1, r2, rng
            )
            out.append(pts[inside])
            got += int(inside.sum())
            weight = measure
            rounds += 1
            if rounds > MAX_PROPOSAL_ROUNDS:
                raise NumericalError(
                    "annulus mostly outside the space; use a tighter region",
                    acceptance=got / (rounds * m),
                )
        pts = np.concatenate(out)[:size]
        if not (self.homogeneous or self.is_basepoint(center)):
            weight = float(self.ball_volume(r2, center) - self.ball_volume(r1, center))
        return pts, weight

    def describe(self):
        return {"kind": self.kind, "volume_dimension": self.volume_dimension}


def rejection(propose, accept, size, min_rate=MIN_ACCEPTANCE):
    """Vectorized rejection sampling.

    ``propose(m)`` returns ``m`` candidate rows, ``accept(rows)`` a mask.
    Returns ``(points, acceptance_rate)``.
    """
    chunks, got, tried = [], 0, 0
    batch = max(64, size)
    for _ in range(MAX_PROPOSAL_ROUNDS):
        cand = propose(batch)
        mask = accept(cand)
        tried += batch
        chunks.append(cand[mask])
        got += int(mask.sum())
        if got >= size:
            break
        rate = max(got, 1) / tried
        if tried > 10_000 and got / tried < min_rate:
            raise NumericalError(
                "rejection acceptance below floor; use a tighter bounding region",
                acceptance=got / tried,
            )
        batch = int(min(4 * batch, (size - got) / rate * 1.2 + 64))
    else:
        raise NumericalError("rejection sampler exhausted its proposal cap", acceptance=got / tried)
    return np.concatenate(chunks)[:size], got / tried


def _positive(value, name):
    value = float(value)
    if not value > 0:
        raise UsageError(f"{name} must be positive, got {value}")
    return value
