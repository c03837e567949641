import numpy as np
import pytest
from scipy import integrate, special

from mslab.errors import DivergenceError, UsageError
from mslab.mollifiers import ExponentialProfile, PowerProfile
from mslab.quadrature import (
    Estimate,
    SamplingPlan,
    breakdown_csv,
    core_bias_bound,
    double_integral_shellmc,
    finiteness_gate,
    seminorm,
    tail_integral,
)
from mslab.spaces import Euclidean, HyperbolicPlane, Sector, sphere_area, unit_ball_volume
from mslab.testfn import TestFunction

GRID = [(N, p, s, d) for N in (1, 2, 3, 4) for p in (1.5, 2.0, 3.0) for s in (0.5, 0.1, 0.02) for d in (1.0, 10.0, 100.0)]


def power_tail_oracle(N, p, s, delta):
    # |S^{N-1}| int_delta^inf s r^{-1-sp} dr
    return sphere_area(N) * s * delta ** (-s * p) / (s * p)


@pytest.mark.parametrize("method", ["closed", "cavalieri"])
def test_tail_integral_power_grid(method):
    worst = 0.0
    for N, p, s, d in GRID:
        got = tail_integral(Euclidean(N), PowerProfile(N, p, s), None, d, method=method)
        worst = max(worst, abs(got / power_tail_oracle(N, p, s, d) - 1.0))
    assert worst <= 1e-8


def test_tail_integral_examples():
    assert tail_integral(Euclidean(1), PowerProfile(1, 2, 0.5), None, 1.0) == pytest.approx(1.0, rel=1e-12)
    assert tail_integral(Euclidean(2), PowerProfile(2, 2, 1e-9), None, 10.0) == pytest.approx(np.pi, rel=1e-6)


def test_hyperbolic_exponential_tail_against_quadrature():
    H = HyperbolicPlane()
    prof = ExponentialProfile(1.0, 2.0, 0.5)
    # rho(r) 2 pi sinh(r) with h = 1, written without overflow
    direct, _ = integrate.quad(
        lambda r: 0.5 * np.pi * (np.exp(-0.5 * r) - np.exp(-2.5 * r)), 5.0, np.inf, epsrel=1e-13
    )
    assert tail_integral(H, prof, None, 5.0) == pytest.approx(direct, rel=1e-9)
    assert tail_integral(H, prof, None, 5.0, method="cavalieri") == pytest.approx(direct, rel=1e-8)


def test_tail_integral_non_increasing_in_delta():
    deltas = np.geomspace(0.01, 1e3, 40)
    cases = [
        (Euclidean(2), PowerProfile(2, 2, 0.1)),
        (HyperbolicPlane(), ExponentialProfile(1.0, 2.0, 0.2)),
        (Sector(np.pi / 2), PowerProfile(2, 2, 0.3)),
    ]
    for space, prof in cases:
        vals = [tail_integral(space, prof, None, d) for d in deltas]
        assert np.all(np.diff(vals) <= 1e-12 * np.abs(vals[:-1]))


def test_sector_polar_tail_matches_apex_closed_form_far_away():
    S = Sector(np.pi / 2)
    prof = PowerProfile(2, 2, 0.3)
    x = np.array([1.0, 1.0])
    # an interior disk of radius < 1 sees the full plane; beyond, the wedge
    near = tail_integral(S, prof, x, 0.5)
    full_disk = tail_integral(Euclidean(2), prof, None, 0.5)
    assert 0 < near < full_disk


def test_tail_integral_errors():
    with pytest.raises(UsageError):
        tail_integral(Euclidean(1), PowerProfile(1, 2, 0.5), None, 0.0)
    with pytest.raises(UsageError):
        tail_integral(HyperbolicPlane(), PowerProfile(2, 2, 0.5), None, 1.0, method="polar")


# -- shell Monte Carlo -------------------------------------------------------------------


def test_shellmc_constant_integrand():
    E = Euclidean(2)
    plan = SamplingPlan(total_samples=20_000, seed=1)

    def outer(m, rng):
        return E.sample_ball(E.basepoint, 1.0, m, rng)

    est = double_integral_shellmc(E, outer, lambda x, y, t, ins: np.ones(len(t)), [1.0, 2.0], plan)
    assert est.value == pytest.approx(np.pi * 3 * np.pi, rel=1e-12)


def test_shellmc_gaussian_oracle():
    E = Euclidean(1)
    plan = SamplingPlan(total_samples=400_000, seed=2)
    edges = np.geomspace(0.01, 4.0, 9)

    def outer(m, rng):
        return E.sample_ball(E.basepoint, 8.0, m, rng)

    est = double_integral_shellmc(E, outer, lambda x, y, t, ins: np.exp(-x[:, 0] ** 2 - y[:, 0] ** 2), edges, plan)
    # with z = x - y: int exp(-x^2 - y^2) = sqrt(pi / 2) int exp(-z^2 / 2) dz over 0.01 < |z| <= 4
    c = np.sqrt(np.pi / 2) * np.sqrt(2 * np.pi)
    truth = c * (special.erf(4 / np.sqrt(2)) - special.erf(0.01 / np.sqrt(2)))
    assert abs(est.value - truth) < 3 * est.stderr


def test_shellmc_symmetric_roles():
    E = Euclidean(1)
    edges = np.geomspace(0.05, 5.0, 9)

    def outer(m, rng):
        return E.sample_ball(E.basepoint, 9.0, m, rng)

    def g(z):
        return np.exp(-z[:, 0] ** 2)

    def h(z):
        return np.exp(-((z[:, 0] - 0.5) ** 2))

    a = double_integral_shellmc(E, outer, lambda x, y, t, i: g(x) * h(y), edges, SamplingPlan(total_samples=200_000, seed=3))
    b = double_integral_shellmc(E, outer, lambda x, y, t, i: h(x) * g(y), edges, SamplingPlan(total_samples=200_000, seed=4))
    assert abs(a.value - b.value) < 4 * np.hypot(a.stderr, b.stderr)


# -- seminorm ----------------------------------------------------------------------------


def indicator_exact(s):
    # int int |1_I(x) - 1_I(y)|^2 s |x - y|^{-1-2s} over R x R, I = (-1, 1)
    return 2 ** (2 - 2 * s) / (1 - 2 * s)


def test_seminorm_indicator_against_exact_value():
    E = Euclidean(1)
    u = TestFunction.indicator(E)
    est = seminorm(E, u, PowerProfile(1, 2, 0.25), SamplingPlan(total_samples=400_000, seed=11))
    assert abs(est.value - indicator_exact(0.25)) < 3 * est.stderr + est.meta["core_bias_bound"]


def test_seminorm_exact_value_by_tensor_quadrature():
    # independent check of the closed form with the diagonal split off
    s = 0.25

    def inner(x):
        right, _ = integrate.quad(lambda y: s * (y - x) ** (-1 - 2 * s), 1, np.inf)
        left, _ = integrate.quad(lambda y: s * (x - y) ** (-1 - 2 * s), -np.inf, -1)
        return right + left

    val, _ = integrate.quad(inner, -1, 1, points=[-1, 1], limit=200)
    assert 2 * val == pytest.approx(indicator_exact(s), rel=1e-6)


def test_seminorm_zero_function():
    E = Euclidean(2)
    u = TestFunction.bump(E, amplitude=0.0)
    est = seminorm(E, u, PowerProfile(2, 2, 0.1), SamplingPlan(total_samples=1000, seed=1))
    assert est.value == 0.0 and est.stderr == 0.0


def test_seminorm_homogeneity_on_matched_seeds():
    E = Euclidean(2)
    u = TestFunction.bump(E)
    plan = SamplingPlan(total_samples=100_000, seed=5)
    prof = PowerProfile(2, 2.5, 0.1)
    a = seminorm(E, u, prof, plan, p=2.5)
    b = seminorm(E, u.scaled(2.0), prof, plan, p=2.5)
    assert b.value == pytest.approx(2**2.5 * a.value, rel=1e-12)


def test_breakdown_sums_to_value():
    E = Euclidean(2)
    est = seminorm(E, TestFunction.bump(E), PowerProfile(2, 2, 0.1), SamplingPlan(total_samples=100_000, seed=6))
    total = sum(b["contribution"] for b in est.breakdown)
    assert total == pytest.approx(est.value, rel=1e-12)
    text = breakdown_csv(est)
    assert text.splitlines()[0] == "shell_lo,shell_hi,contribution,stderr,samples"
    assert len(text.splitlines()) == len(est.breakdown) + 1


def test_seminorm_deterministic_across_workers():
    E = Euclidean(2)
    u = TestFunction.bump(E)
    plan = SamplingPlan(total_samples=200_000, seed=7, block_size=4096)
    prof = PowerProfile(2, 2, 0.1)
    vals = {w: seminorm(E, u, prof, plan, workers=w) for w in (1, 4, 16)}
    ref = vals[1]
    for est in vals.values():
        assert est.value == ref.value and est.stderr == ref.stderr
        assert est.breakdown == ref.breakdown


def test_seminorm_stderr_scaling():
    E = Euclidean(2)
    u = TestFunction.bump(E)
    prof = PowerProfile(2, 2, 0.1)
    ns = np.array([25_000, 100_000, 400_000, 1_600_000])
    errs = [seminorm(E, u, prof, SamplingPlan(total_samples=int(n), seed=8)).stderr for n in ns]
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert -0.6 <= slope <= -0.4


def test_near_far_split_consistency():
    E = Euclidean(2)
    u = TestFunction.bump(E)
    prof = PowerProfile(2, 2, 0.1)
    a = seminorm(E, u, prof, SamplingPlan(total_samples=400_000, seed=9, far_factor=2.0))
    b = seminorm(E, u, prof, SamplingPlan(total_samples=400_000, seed=10, far_factor=4.0))
    assert abs(a.value - b.value) < 4 * np.hypot(a.stderr, b.stderr)


def test_sector_apex_bump_against_plane():
    # small s: E ~ 2 L ||u||^p; the quarter plane has a quarter of both the AVR and the norm
    S = Sector(np.pi / 2)
    est = seminorm(S, TestFunction.bump(S), PowerProfile(2, 2, 0.02), SamplingPlan(total_samples=400_000, seed=12))
    E = Euclidean(2)
    full = seminorm(E, TestFunction.bump(E), PowerProfile(2, 2, 0.02), SamplingPlan(total_samples=400_000, seed=12))
    assert est.value / full.value == pytest.approx(1 / 16, rel=0.1)


def test_shells_must_reach_twice_the_support():
    E = Euclidean(1)
    with pytest.raises(UsageError):
        seminorm(E, TestFunction.bump(E), PowerProfile(1, 2, 0.1), SamplingPlan(total_samples=1000, shells=(1e-3, 1.0)))
    with pytest.raises(UsageError):
        SamplingPlan(far_factor=1.0)
    with pytest.raises(UsageError):
        SamplingPlan(shells=(1.0, 0.5))


def test_divergent_pair_integral_raises():
    E = Euclidean(2)
    u = TestFunction.indicator(E)
    prof = PowerProfile(2, 2, 0.6)
    assert core_bias_bound(E, u, prof, 2.0, 1e-6) == np.inf
    with pytest.raises(DivergenceError) as info:
        seminorm(E, u, prof, SamplingPlan(total_samples=10_000, seed=1))
    assert "core_bias_bound" in info.value.payload


def test_core_bias_bound_lipschitz_closed_form():
    # bump in E1, rho = s r^{-1-sp}: Lip^p m(B_{R+r0}) 2 s r0^{p - sp} / (p - sp)
    E = Euclidean(1)
    u = TestFunction.bump(E)
    s, p, r0 = 0.1, 2.0, 1e-3
    expect = u.lipschitz**p * 2 * (1 + r0) * 2 * s * r0 ** (p - s * p) / (p - s * p)
    assert core_bias_bound(E, u, PowerProfile(1, p, s), p, r0) == pytest.approx(expect, rel=1e-6)


def test_finiteness_gate():
    E = Euclidean(1)
    plan = SamplingPlan(total_samples=100_000, seed=13)
    ok = finiteness_gate(E, TestFunction.bump(E), PowerProfile(1, 2, 0.1), plan)
    assert ok.passed, ok.reason
    bad = finiteness_gate(E, TestFunction.indicator(E), PowerProfile(1, 2, 0.6), plan)
    assert not bad.passed
    assert set(ok.to_dict()) >= {"passed", "tau", "lowest_decade_slope"}


def test_estimate_helpers():
    e = Estimate(2.0, 0.1, 10)
    assert e.rel_stderr == pytest.approx(0.05)
    assert e.to_dict()["value"] == 2.0
    assert unit_ball_volume(2) == pytest.approx(np.pi)
