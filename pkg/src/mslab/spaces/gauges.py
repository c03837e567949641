"""Gauges (norms) of convex symmetric unit balls K and their volumes |K|."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from ..errors import UsageError


class Gauge:
    dim = 0
    unit_ball_volume = None

    def __call__(self, v):
        raise NotImplementedError

    def bounding_box(self):
        """Axis-aligned box ``(low, high)`` containing the unit ball."""
        raise NotImplementedError

    def describe(self):
        raise NotImplementedError


class LqGauge(Gauge):
    """``||v||_q`` for ``q`` in ``[1, inf]``."""

    def __init__(self, dim, q):
        self.dim = int(dim)
        self.q = float(q)
        if self.dim < 1 or not self.q >= 1:
            raise UsageError("lq gauge needs dim >= 1 and q >= 1")
        self.unit_ball_volume = lq_ball_volume(self.dim, self.q)

    def __call__(self, v):
        v = np.abs(np.asarray(v, dtype=float))
        if np.isinf(self.q):
            return v.max(axis=-1)
        if self.q == 1:
            return v.sum(axis=-1)
        if self.q == 2:
            return np.sqrt((v * v).sum(axis=-1))
        return (v**self.q).sum(axis=-1) ** (1.0 / self.q)

    def bounding_box(self):
        return -np.ones(self.dim), np.ones(self.dim)

    def describe(self):
        q = "inf" if np.isinf(self.q) else self.q
        return {"type": "lq", "q": q}


class WeightedLinfGauge(Gauge):
    """``max_i w_i |v_i|``; the unit ball is the box with half-sides ``1/w_i``."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 1 or np.any(self.weights <= 0):
            raise UsageError("weights must be a positive vector")
        self.dim = self.weights.size
        self.unit_ball_volume = float(np.prod(2.0 / self.weights))

    def __call__(self, v):
        return np.max(np.abs(np.asarray(v, dtype=float)) * self.weights, axis=-1)

    def bounding_box(self):
        return -1.0 / self.weights, 1.0 / self.weights

    def describe(self):
        return {"type": "weighted_linf", "weights": self.weights.tolist()}


class PolytopeGauge(Gauge):
    """Gauge of ``K = {v : <a_i, v> <= 1}`` given the facet normals ``a_i``.

    ``K`` must be bounded and symmetric (``-a_i`` is also a facet normal), so
    that ``max_i <a_i, v>`` is a norm.
    """

    def __init__(self, normals):
        from scipy.spatial import ConvexHull, HalfspaceIntersection

        a = np.atleast_2d(np.asarray(normals, dtype=float))
        self.normals = a
        self.dim = a.shape[1]
        for row in a:
            if not np.any(np.all(np.isclose(a, -row), axis=1)):
                raise UsageError("polytope gauge needs centrally symmetric facet normals")
        halfspaces = np.hstack([a, -np.ones((a.shape[0], 1))])
        try:
            hs = HalfspaceIntersection(halfspaces, np.zeros(self.dim))
            hull = ConvexHull(hs.intersections)
        except Exception as exc:  # qhull raises its own error type
            raise UsageError(f"facet normals do not bound a polytope: {exc}") from exc
        self.vertices = hs.intersections[hull.vertices]
        self.unit_ball_volume = float(hull.volume)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return np.max(v @ self.normals.T, axis=-1)

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def describe(self):
        return {"type": "polytope", "normals": self.normals.tolist()}


def lq_ball_volume(n, q):
    """``|{v in R^n : ||v||_q <= 1}| = (2 Gamma(1 + 1/q))^n / Gamma(1 + n/q)``."""
    if np.isinf(q):
        return 2.0**n
    return float(np.exp(n * (np.log(2.0) + gammaln(1 + 1 / q)) - gammaln(1 + n / q)))


def make_gauge(dim, desc):
    """Build a gauge from a config dict (``type``: lq | weighted_linf | polytope)."""
    kind = desc.get("type", "lq")
    if kind == "lq":
        q = desc.get("q", 2)
        q = np.inf if q in ("inf", "infinity", float("inf")) else float(q)
        return LqGauge(dim, q)
    if kind == "weighted_linf":
        g = WeightedLinfGauge(desc["weights"])
        if g.dim != dim:
            raise UsageError("weights length must equal the dimension")
        return g
    if kind == "polytope":
        g = PolytopeGauge(desc["normals"])
        if g.dim != dim:
            raise UsageError("facet normals must have one entry per dimension")
        return g
    raise UsageError(f"unknown gauge type {kind!r}")
