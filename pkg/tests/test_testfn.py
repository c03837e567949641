import numpy as np
import pytest
from scipy import integrate

from mslab.errors import UsageError
from mslab.quadrature import SamplingPlan
from mslab.spaces import Banach, Euclidean, HyperbolicPlane, Sector, make_gauge
from mslab.testfn import TestFunction, make_test_function


def test_pointwise_examples():
    E1 = Euclidean(1)
    ind = TestFunction.indicator(E1)
    assert ind([0.5]) == 1.0 and ind([2.0]) == 0.0
    assert TestFunction.bump(E1)([0.0]) == 1.0
    assert TestFunction.gaussian(E1)([1.0]) == pytest.approx(np.exp(-1.0))


def test_space_mismatch_is_a_usage_error():
    u = TestFunction.bump(Euclidean(2))
    with pytest.raises(UsageError):
        u([0.0, 0.0, 0.0])
    with pytest.raises(UsageError):
        TestFunction(Euclidean(1), "triangle")


@pytest.mark.parametrize(
    "u, expected",
    [
        (TestFunction.indicator(Euclidean(1)), 2.0),
        (TestFunction.indicator(Euclidean(2)), np.pi),
        (TestFunction.gaussian(Euclidean(1)), np.sqrt(np.pi / 2)),
    ],
    ids=["indicator-E1", "indicator-E2", "gaussian-E1"],
)
def test_lp_norm_examples(u, expected):
    assert u.lp_norm(2).value == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize(
    "space",
    [Euclidean(1), Euclidean(3), Banach(make_gauge(2, {"type": "lq", "q": 1})), Sector(np.pi / 2)],
    ids=lambda s: f"{s.kind}{s.dim}",
)
@pytest.mark.parametrize("kind", ["bump", "gaussian"])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_analytic_norm_matches_quadrature(space, kind, p):
    u = TestFunction(space, kind, 0.7)
    analytic = u.analytic_lp(p)
    radial, _ = u.radial_lp(p)
    assert analytic == pytest.approx(radial, rel=1e-4)


def test_bump_norm_against_direct_quadrature():
    u = TestFunction.bump(Euclidean(2), 1.3)
    direct, _ = integrate.quad(lambda r: 2 * np.pi * r * (1 - (r / 1.3) ** 2) ** 4, 0, 1.3)
    assert u.lp_norm(2).value == pytest.approx(direct, rel=1e-10)


def test_hyperbolic_norm_uses_layer_cake():
    u = TestFunction.bump(HyperbolicPlane(), 1.0)
    est = u.lp_norm(2)
    direct, _ = integrate.quad(lambda r: (1 - r * r) ** 4 * 2 * np.pi * np.sinh(r), 0, 1)
    assert est.meta["method"] == "radial"
    assert est.value == pytest.approx(direct, rel=1e-9)


def test_translation_invariance_in_homogeneous_space():
    E = Euclidean(2)
    a = TestFunction.bump(E, 1.0).mc_lp(2, 200_000, 1)
    b = TestFunction.bump(E, 1.0, center=[3.0, -7.0]).mc_lp(2, 200_000, 2)
    assert abs(a.value - b.value) < 4 * np.hypot(a.stderr, b.stderr)


def test_monte_carlo_norm_error_scales_as_inverse_sqrt():
    u = TestFunction.bump(Euclidean(2))
    truth = u.analytic_lp(2)
    ns = np.array([2_000, 8_000, 32_000, 128_000, 512_000])
    errs = []
    for n in ns:
        # rms error over independent seeds
        devs = [u.mc_lp(2, n, seed).value - truth for seed in range(24)]
        errs.append(np.sqrt(np.mean(np.square(devs))))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert -0.6 <= slope <= -0.4


def test_sup_bound_and_support():
    rng = np.random.default_rng(0)
    E = Euclidean(2)
    for kind in ("indicator", "bump", "gaussian"):
        u = TestFunction(E, kind, 0.8, amplitude=-2.5)
        x = rng.uniform(-3, 3, (5000, 2))
        v = u(x)
        assert np.all(np.abs(v) <= u.sup)
        if u.compact:
            assert np.all(v[np.linalg.norm(x, axis=1) > u.support_radius] == 0)


def test_scaling_and_config_builder():
    E = Euclidean(1)
    u = make_test_function(E, {"kind": "bump", "radius": 2.0, "amplitude": 3.0})
    assert u.scaled(2.0).amplitude == 6.0
    assert u.scaled(2.0).lp_norm(2).value == pytest.approx(4.0 * u.lp_norm(2).value)


def test_method_selection_and_errors():
    u = TestFunction.bump(Euclidean(2))
    assert u.lp_norm(2, method="radial").meta["method"] == "radial"
    mc = u.lp_norm(2, SamplingPlan(total_samples=100_000, seed=4), method="mc")
    assert abs(mc.value - u.analytic_lp(2)) < 4 * mc.stderr
    with pytest.raises(UsageError):
        u.lp_norm(1.0)
    with pytest.raises(UsageError):
        TestFunction.bump(HyperbolicPlane()).lp_norm(2, method="analytic")
