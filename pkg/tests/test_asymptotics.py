import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mslab.asymptotics import (
    LimitStudyResult,
    check_basepoint_independence,
    decomposition_terms,
    estimate_avr,
    estimate_entropy,
    extrapolate,
    fit_limit,
    limit_study,
    numeric_structural_constant,
    sharpness_check,
)
from mslab.errors import DivergenceError, UsageError
from mslab.mollifiers import MollifierFamily, PowerProfile
from mslab.quadrature import SamplingPlan, seminorm
from mslab.spaces import Banach, Euclidean, HyperbolicPlane, Sector, make_gauge
from mslab.testfn import TestFunction

SCHEDULE = [0.4, 0.2, 0.1, 0.05, 0.025]


@pytest.mark.parametrize(
    "space, expected",
    [
        (Euclidean(2), np.pi),
        (Euclidean(3), 4 * np.pi / 3),
        (Banach(make_gauge(2, {"type": "lq", "q": 1})), 2.0),
        (Sector(np.pi / 2), np.pi / 4),
    ],
    ids=["E2", "E3", "l1", "sector"],
)
def test_avr_exact_on_power_volume_spaces(space, expected):
    est = estimate_avr(space)
    assert est.flag == "finite" and est.reliable
    np.testing.assert_allclose(est.ratios, expected, rtol=1e-13)
    assert est.uncertainty == 0.0


def test_avr_flags():
    assert estimate_avr(HyperbolicPlane(), N=2, radii=np.logspace(0, 2.5, 20)).flag == "infinite"
    assert estimate_avr(Euclidean(2), N=3).flag == "zero"


def test_entropy_of_hyperbolic_plane():
    est = estimate_entropy(HyperbolicPlane())
    assert est.value == pytest.approx(1.0, abs=0.01)
    assert estimate_entropy(Euclidean(2)).value == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(UsageError):
        estimate_entropy(HyperbolicPlane(), radii=np.linspace(1, 10, 10))


def test_basepoint_independence():
    assert check_basepoint_independence(Euclidean(2), [0, 0], [3, -1]).passed
    assert check_basepoint_independence(Sector(np.pi / 2), [0.1, 0.1], [2.0, 0.5]).passed
    assert check_basepoint_independence(HyperbolicPlane(), [0, 0], [0.5, 0.2], quantity="entropy").passed
    with pytest.raises(UsageError):
        check_basepoint_independence(Euclidean(2), [0, 0], [0, 0])


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-5, 5))
def test_fit_limit_recovers_exact_lines(c, m):
    pts = [(a, c + m * a, 0.01) for a in SCHEDULE]
    fit = fit_limit(pts)
    assert fit.limit == pytest.approx(c, abs=1e-9)
    assert fit.used == len(SCHEDULE)


def test_fit_limit_drops_curved_head():
    # quadratic curvature at large parameters only; the window shrinks to the linear part
    pts = [(a, 1.0 + a + (50 * a**2 if a > 0.1 else 0.0), 1e-3) for a in SCHEDULE]
    fit = fit_limit(pts)
    assert fit.used < len(SCHEDULE)
    assert extrapolate(pts)[0] == pytest.approx(fit.limit)
    with pytest.raises(UsageError):
        fit_limit(pts[:2])


def test_limit_study_small_budget_and_gate():
    E = Euclidean(1)
    fam = MollifierFamily.power_law(1, 2, SCHEDULE)
    study = limit_study(E, TestFunction.bump(E), fam, SamplingPlan(total_samples=100_000, seed=1))
    assert isinstance(study, LimitStudyResult)
    assert study.gate["passed"]
    assert study.relative_error < 0.05
    assert len(study.rows()) == len(SCHEDULE)
    assert study.numeric_L == pytest.approx(study.L, rel=1e-4)
    with pytest.raises(UsageError):
        limit_study(E, TestFunction.bump(E), fam, SamplingPlan(total_samples=1000), schedule=[0.1, 0.2, 0.3])


def test_limit_study_gate_blocks_non_members():
    E = Euclidean(2)
    fam = MollifierFamily.power_law(2, 2, SCHEDULE)
    with pytest.raises(DivergenceError):
        limit_study(E, TestFunction.indicator(E), fam, SamplingPlan(total_samples=20_000, seed=1), tau=0.6)


def test_limit_study_error_shrinks_with_budget():
    E = Euclidean(1)
    u = TestFunction.bump(E)
    fam = MollifierFamily.power_law(1, 2, SCHEDULE)
    errs = [
        limit_study(E, u, fam, SamplingPlan(total_samples=n, seed=21), gate=False).relative_error
        for n in (5_000, 80_000, 1_280_000)
    ]
    assert errs[-1] == min(errs)


def test_numeric_constant_for_hyperbolic_exponential_kernels():
    fam = MollifierFamily.exponential(1.0, 2.0, SCHEDULE)
    # evaluated at s = 1e-6, delta = 100, so exp(-s delta) leaves a 1e-4 relative offset
    assert numeric_structural_constant(fam, HyperbolicPlane()) == pytest.approx(np.pi, rel=2e-4)


def test_decomposition_partition_identity():
    E = Euclidean(1)
    u = TestFunction.bump(E)
    plan = SamplingPlan(total_samples=200_000, seed=3)
    prof = PowerProfile(1, 2, 0.05)
    I, II, III, total = decomposition_terms(E, u, prof, 4.0, plan, 2.0)
    assert total.value == pytest.approx(I.value + 2 * II.value + III.value, rel=1e-12)
    ref = seminorm(E, u, prof, SamplingPlan(total_samples=200_000, seed=4))
    assert abs(total.value - ref.value) < 4 * np.hypot(total.stderr, ref.stderr)


def _fake_study(extrapolated, unc, norm, p):
    return LimitStudyResult([], [], extrapolated, unc, 0.0, 0.0, norm, 0.0, p)


def test_sharpness_flags():
    rep = sharpness_check("cone-bound", Euclidean(2), _fake_study(2 * np.pi, 0.01, 1.0, 2.0), 2, 2)
    assert rep.equality and not rep.exceeds and rep.bound == pytest.approx(2 * np.pi)
    rep = sharpness_check("cone-bound", Sector(np.pi / 2), _fake_study(np.pi / 2, 0.01, 1.0, 2.0), 2, 2)
    assert rep.slack == pytest.approx(0.75) and not rep.equality
    rep = sharpness_check("entropy-bound", HyperbolicPlane(), _fake_study(3.0, 0.01, 1.0, 2.0), 2, 2)
    assert rep.exceeds
    with pytest.raises(UsageError):
        sharpness_check("cone-bound", Euclidean(2), _fake_study(1.0, 0.1, 1.0, 2.0), 2, 3)
