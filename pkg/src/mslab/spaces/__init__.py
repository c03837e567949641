"""Concrete metric measure spaces."""

import numpy as np

from ..errors import UsageError
from .base import MetricMeasureSpace
from .dilation import Banach, Euclidean, sphere_area, unit_ball_volume
from .gauges import LqGauge, PolytopeGauge, WeightedLinfGauge, lq_ball_volume, make_gauge
from .heisenberg import Heisenberg, cc_distance_origin
from .hyperbolic import HyperbolicPlane
from .sector import Sector

__all__ = [
    "Banach",
    "Euclidean",
    "Heisenberg",
    "HyperbolicPlane",
    "LqGauge",
    "MetricMeasureSpace",
    "PolytopeGauge",
    "Sector",
    "WeightedLinfGauge",
    "ball_volume",
    "calibrate_unit_ball",
    "cc_distance_origin",
    "distance",
    "lq_ball_volume",
    "make_space",
    "sample_region",
    "sphere_area",
    "unit_ball_volume",
]


def distance(space, x, y):
    return space.distance(x, y)


def ball_volume(space, x, r):
    if not np.all(np.asarray(r, dtype=float) > 0):
        raise UsageError("ball radius must be positive")
    return space.ball_volume(r, None if x is None else space.validate(x))


def calibrate_unit_ball(space, samples, seed):
    if not isinstance(space, Heisenberg):
        raise UsageError("unit-ball calibration only applies to the Heisenberg group")
    return space.calibrate_unit_ball(samples, seed)


def sample_region(space, region, rng, size=1):
    return space.sample_region(region, rng, size)


def make_space(desc):
    """Build a space from a config descriptor dict."""
    kind = desc.get("kind")
    if kind == "euclidean":
        return Euclidean(desc.get("dimension", 1))
    if kind == "banach":
        n = int(desc.get("dimension", 2))
        return Banach(make_gauge(n, desc.get("gauge", {"type": "lq", "q": 2})))
    if kind == "heisenberg":
        return Heisenberg(desc.get("unit_ball_volume"))
    if kind == "hyperbolic":
        return HyperbolicPlane()
    if kind == "sector":
        return Sector(desc.get("theta", np.pi / 2))
    raise UsageError(f"unknown space kind {kind!r}")
