import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mslab.errors import NumericalError, UsageError
from mslab.rng import stream
from mslab.spaces import (
    Banach,
    Euclidean,
    Heisenberg,
    HyperbolicPlane,
    Sector,
    ball_volume,
    calibrate_unit_ball,
    cc_distance_origin,
    distance,
    lq_ball_volume,
    make_gauge,
    make_space,
    sample_region,
    unit_ball_volume,
)
from mslab.spaces.heisenberg import dilate, geodesic_ratio

from .conftest import analytic_spaces, random_points


# -- oracles -----------------------------------------------------------------------------


@pytest.mark.parametrize("n, expected", [(1, 2.0), (2, np.pi), (3, 4.0 * np.pi / 3.0), (4, np.pi**2 / 2.0)])
def test_unit_ball_volume_closed_forms(n, expected):
    assert unit_ball_volume(n) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("q, expected", [(1, 2.0), (2, np.pi), (np.inf, 4.0)])
def test_lq_ball_volume_in_plane(q, expected):
    assert lq_ball_volume(2, q) == pytest.approx(expected, rel=1e-13)


def test_polytope_gauge_volume_matches_square():
    normals = [[1, 0], [-1, 0], [0, 1], [0, -1]]
    gauge = make_gauge(2, {"type": "polytope", "normals": normals})
    assert gauge.unit_ball_volume == pytest.approx(4.0, rel=1e-12)
    assert gauge(np.array([0.5, -0.25])) == pytest.approx(0.5)


def test_hyperbolic_distance_and_area():
    H = HyperbolicPlane()
    x = H.point_at(1.0, 0.3)
    assert H.distance(H.basepoint, x) == pytest.approx(1.0, rel=1e-13)
    assert H.ball_volume(1.0) == pytest.approx(2 * np.pi * (np.cosh(1.0) - 1.0), rel=1e-14)
    # independent oracle: area element 4 / (1 - rho^2)^2 over the Euclidean disk of radius tanh(1/2)
    from scipy import integrate

    rho_max = np.tanh(0.5)
    area, _ = integrate.quad(lambda rho: 2 * np.pi * rho * 4 / (1 - rho**2) ** 2, 0, rho_max)
    assert H.ball_volume(1.0) == pytest.approx(area, rel=1e-12)
    assert H.ball_volume(1.0) == pytest.approx(3.41228, abs=1e-5)


def test_sector_apex_volume():
    S = Sector(np.pi / 2)
    assert S.ball_volume(2.0) == pytest.approx(0.5 * (np.pi / 2) * 4.0, rel=1e-14)


def test_sector_interior_volume_small_ball_is_full_disk():
    S = Sector(np.pi / 2)
    x = np.array([5.0, 5.0])
    assert S.ball_volume(1.0, x) == pytest.approx(np.pi, rel=1e-9)


def test_sector_interior_volume_against_monte_carlo(rng):
    S = Sector(np.pi / 2)
    x = np.array([0.3, 0.6])
    r = 1.5
    n = 400_000
    g = x + r * (2 * rng.random((n, 2)) - 1)
    inside = (np.linalg.norm(g - x, axis=1) <= r) & (g[:, 0] >= 0) & (g[:, 1] >= 0)
    frac = inside.mean()
    est = 4 * r * r * frac
    err = 4 * r * r * np.sqrt(frac * (1 - frac) / n)
    assert abs(S.ball_volume(r, x) - est) < 4 * err


def test_heisenberg_vertical_axis_and_horizontal_plane():
    assert cc_distance_origin(np.array([0.0, 0.0, 1.0])) == pytest.approx(2 * np.sqrt(np.pi), rel=1e-14)
    assert cc_distance_origin(np.array([0.6, 0.8, 0.0])) == pytest.approx(1.0, rel=1e-15)


def test_heisenberg_geodesic_ratio_is_monotone():
    phi = np.linspace(1e-3, np.pi - 1e-3, 2000)
    assert np.all(np.diff(geodesic_ratio(phi)) > 0)


def test_heisenberg_root_finder_failure_carries_payload():
    with pytest.raises(NumericalError) as info:
        cc_distance_origin(np.array([[1.0, 0.0, 2.3]]), max_iter=2)
    assert {"bracket_width", "residual", "point"} <= set(info.value.payload)


def test_heisenberg_calibration_is_self_consistent(heisenberg):
    c = heisenberg.calibration
    again = Heisenberg().calibrate_unit_ball(1_600_000, seed=99)
    assert abs(again.value - c.value) < 3 * np.hypot(again.stderr, c.stderr)


# -- metric axioms -----------------------------------------------------------------------


@pytest.mark.parametrize("space", analytic_spaces(), ids=lambda s: s.kind + str(s.dim))
def test_metric_axioms_analytic(space, rng):
    n = 10_000
    x, y, z = (random_points(space, n, rng, 2.0) for _ in range(3))
    dxy, dyx = space.distance(x, y), space.distance(y, x)
    assert np.all(dxy >= 0)
    np.testing.assert_allclose(dxy, dyx, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(space.distance(x, x), 0.0, atol=1e-7)
    assert np.all(space.distance(x, z) <= dxy + space.distance(y, z) + 1e-12)


def test_metric_axioms_heisenberg(heisenberg, rng):
    n = 10_000
    x, y, z = ((2 * rng.random((n, 3)) - 1) * [1, 1, 0.6] for _ in range(3))
    H = heisenberg
    dxy = H.distance(x, y)
    np.testing.assert_allclose(dxy, H.distance(y, x), rtol=1e-10)
    assert np.all(H.distance(x, z) <= dxy + H.distance(y, z) + 1e-8)
    np.testing.assert_allclose(H.distance(x, x), 0.0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5).filter(lambda t: abs(t) > 1e-6), st.floats(0.05, 20)
)
def test_cc_dilation_homogeneity(x, y, t, lam):
    q = np.array([x, y, t])
    d = cc_distance_origin(q)
    dl = cc_distance_origin(dilate(q, lam))
    assert abs(dl - lam * d) <= 1e-8 * lam * d


# -- volumes and sampling ----------------------------------------------------------------


@pytest.mark.parametrize(
    "space",
    [Euclidean(1), Euclidean(3), Banach(make_gauge(2, {"type": "lq", "q": 1})), Sector(np.pi / 3)],
    ids=lambda s: s.kind + str(s.dim),
)
def test_power_model_scaling_is_exact(space):
    N = space.volume_dimension
    r = np.array([0.01, 0.5, 3.0, 1e4])
    assert np.all(space.ball_volume(r) / space.ball_volume(1.0) == pytest.approx(r**N, rel=1e-14))


@pytest.mark.parametrize("space", analytic_spaces(), ids=lambda s: s.kind + str(s.dim))
def test_sampled_subball_fraction_matches_volume_ratio(space):
    rng = stream(5, 1)
    n = 40_000
    pts, _ = sample_region(space, {"type": "ball", "r": 2.0}, rng, n)
    inner = space.distance(space.basepoint, pts) <= 1.0
    expect = float(space.ball_volume(1.0) / space.ball_volume(2.0))
    se = np.sqrt(expect * (1 - expect) / n)
    assert abs(inner.mean() - expect) < 4 * se


def test_annulus_sampler_stays_in_annulus(rng):
    for space in analytic_spaces():
        c = random_points(space, 1, rng, 0.5)[0]
        pts, w = sample_region(space, {"type": "annulus", "center": c, "r1": 0.5, "r2": 1.0}, rng, 500)
        d = space.distance(c, pts)
        assert np.all((d > 0.5 - 1e-9) & (d <= 1.0 + 1e-9))
        assert w > 0


def test_facade_functions_and_errors():
    E = Euclidean(2)
    assert distance(E, [0, 0], [3, 4]) == pytest.approx(5.0)
    assert ball_volume(E, None, 1.0) == pytest.approx(np.pi)
    with pytest.raises(UsageError):
        ball_volume(E, None, -1.0)
    with pytest.raises(UsageError):
        E.distance([0, 0, 0], [1, 1, 1])
    with pytest.raises(UsageError):
        HyperbolicPlane().distance([0, 0], [1.2, 0])
    with pytest.raises(UsageError):
        calibrate_unit_ball(E, 10**5, 1)
    with pytest.raises(UsageError):
        Sector(4.0)
    with pytest.raises(UsageError):
        make_space({"kind": "torus"})


def test_uncalibrated_heisenberg_volume_is_a_state_error():
    from mslab.errors import StateError

    with pytest.raises(StateError):
        Heisenberg().ball_volume(1.0)
