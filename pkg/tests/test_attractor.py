import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stochlattice.attractor import (AttractorCloud, PathMismatchError, absorbing_radius,
                                    ball_samples, hausdorff_semidist, pullback_cloud,
                                    pullback_clouds, tail_profile, usc_sweep)
from stochlattice.dynamics import Forcing, NuProfile, SystemParams
from stochlattice.noise import ou_attach, sample_wiener


@pytest.fixture(scope="module")
def path():
    return ou_attach(sample_wiener(3, -50.0, 1.0, 1e-3))


def test_radius_without_forcing(path, params):
    for alpha in (-0.5, 0.0, 0.7):
        ball = absorbing_radius(alpha, 0.0, path, params, Forcing(family="zero"))
        z0 = path.z_values[path.origin]
        assert ball.radius_sq == pytest.approx(math.exp(2 * alpha * z0), rel=1e-14)


def test_radius_constant_psi_closed_form(path, params):
    f = Forcing(gamma=0.0, phase=math.pi / 2)
    c = float(f.psi1_l1(0.0, params, 32))
    ball = absorbing_radius(0.0, 0.0, path, params, f, horizon=40.0)
    exact = 1 + 2 * c / params.lambda0 * (1 - math.exp(-params.lambda0 * 40.0))
    assert ball.radius_sq == pytest.approx(exact, rel=1e-6)


def test_radius_converged_in_horizon(path, params, forcing):
    short = absorbing_radius(0.5, 0.0, path, params, forcing, horizon=20.0)
    long = absorbing_radius(0.5, 0.0, path, params, forcing, horizon=40.0)
    assert abs(long.radius_sq - short.radius_sq) < 1e-6
    assert long.radius_sq >= short.radius_sq
    assert long.radius_sq >= math.exp(2 * 0.5 * path.z_values[path.origin])


def test_radius_warns_on_short_horizon(path, params, forcing):
    with pytest.warns(RuntimeWarning):
        absorbing_radius(0.0, 0.0, path, params, forcing, horizon=2.0)


def test_ball_samples_inside_ball():
    pts = ball_samples(64, 65, 2.0)
    norms = np.linalg.norm(pts, axis=1)
    assert np.all(norms <= 2.0 + 1e-12) and norms.max() == pytest.approx(2.0)
    np.testing.assert_array_equal(pts, ball_samples(64, 65, 2.0))


def test_linear_contraction(path):
    par = SystemParams(alpha=0.0, nu=NuProfile("constant", nu0=0.0))
    T = 3.0
    cloud = pullback_cloud(0.0, 0.0, path, T, 16, par, Forcing(family="zero"), half_width=4)
    start = ball_samples(16, 9, cloud.initial_radius)
    d0 = np.max(np.linalg.norm(start[:, None] - start[None], axis=-1))
    assert cloud.diameter() <= math.exp(-par.lam * T) * d0 * (1 + 1e-2)


def test_nested_horizons(path, params, forcing):
    short = pullback_cloud(0.2, 0.0, path, 4.0, 16, params, forcing, half_width=8)
    long = pullback_cloud(0.2, 0.0, path, 8.0, 16, params, forcing, half_width=8)
    assert long.diameter() <= short.diameter() + 1e-9


def test_cloud_inside_absorbing_ball(path, params, forcing):
    for alpha in (-0.5, 0.5):
        cloud = pullback_cloud(alpha, 0.0, path, 8.0, 16, params, forcing, half_width=8)
        ball = absorbing_radius(alpha, 0.0, path, params, forcing, half_width=8)
        assert np.all(ball.contains(cloud.points))


def test_cloud_needs_two_points(path, params, forcing):
    with pytest.raises(ValueError):
        pullback_cloud(0.0, 0.0, path, 1.0, 1, params, forcing, half_width=2)


def test_semidist_examples():
    unit = np.zeros((1, 5))
    unit[0, 2] = 1.0
    zero = np.zeros((1, 5))
    assert hausdorff_semidist(unit, zero, "l2") == pytest.approx(1.0)
    assert hausdorff_semidist(unit, zero, "l2_cap_lq", q=4.0) == pytest.approx(2.0)
    assert hausdorff_semidist(unit, unit) == 0.0
    with pytest.raises(ValueError):
        hausdorff_semidist(np.zeros((0, 5)), zero)
    with pytest.raises(ValueError):
        hausdorff_semidist(unit, zero, "sup")


clouds = arrays(np.float64, st.tuples(st.integers(1, 6), st.just(5)),
                elements=st.floats(-3, 3, allow_nan=False))


@settings(max_examples=100, deadline=None)
@given(clouds, clouds, clouds, st.floats(1.0, 6.0))
def test_semidist_properties(a, b, c, q):
    dab = hausdorff_semidist(a, b, "l2")
    assert dab >= 0
    assert hausdorff_semidist(a, np.vstack([a, b]), "l2") == 0.0
    haus_bc = max(hausdorff_semidist(b, c), hausdorff_semidist(c, b))
    assert hausdorff_semidist(a, c) <= dab + haus_bc + 1e-12
    both = hausdorff_semidist(a, b, "l2_cap_lq", q)
    assert both >= max(dab, hausdorff_semidist(a, b, "lq", q)) - 1e-12


def test_usc_singleton_is_zero(path, params, forcing):
    res = usc_sweep([0.4], 0.4, 0.0, path, 2.0, 4, params, forcing, half_width=4)
    assert res.rows[0]["dist_sum"] == 0.0


def test_usc_refuses_mismatched_paths(params, forcing):
    a = ou_attach(sample_wiener(1, -45.0, 1.0, 1e-2))
    b = ou_attach(sample_wiener(2, -45.0, 1.0, 1e-2))
    with pytest.raises(PathMismatchError):
        usc_sweep([0.1], 0.0, 0.0, [a, b], 2.0, 4, params, forcing, half_width=4)


def test_doubling_M_refinement(path, params, forcing):
    small = usc_sweep([0.5], 0.25, 0.0, path, 6.0, 8, params, forcing, half_width=8)
    big = usc_sweep([0.5], 0.25, 0.0, path, 6.0, 16, params, forcing, half_width=8)
    res = big.clouds[0.25].resolution + small.clouds[0.25].resolution
    assert big.rows[0]["dist_l2"] <= small.rows[0]["dist_l2"] + res + 1e-12


def test_batched_clouds_match_single(path, params, forcing):
    both = pullback_clouds([0.1, 0.6], 0.0, path, 3.0, 6, params, forcing, half_width=4)
    one = pullback_cloud(0.6, 0.0, path, 3.0, 6, params, forcing, half_width=4)
    np.testing.assert_array_equal(both[1].points, one.points)


def test_tail_profile_examples():
    pts = np.outer([1.0, 2.0], 1.0 / (1.0 + np.arange(-4, 5) ** 2))
    prof = tail_profile(pts, [0, 1, 2, 3, 4], 4.0)
    assert prof[-1]["tail_l2"] == 0.0 and prof[-1]["mass_lq"] == 0.0
    for key in ("tail_l2", "tail_lq", "mass_l2", "mass_lq"):
        vals = [r[key] for r in prof]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert prof[0]["tail_l2"] == pytest.approx(2 * math.sqrt(2 * (0.25 + 0.04 + 0.01 + 1 / 289)))
    with pytest.raises(ValueError):
        tail_profile(pts, [5], 4.0)


def test_cloud_is_read_only(path, params, forcing):
    cloud = pullback_cloud(0.0, 0.0, path, 1.0, 3, params, forcing, half_width=2)
    assert isinstance(cloud, AttractorCloud) and len(cloud.vectors) == 3
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 1.0
