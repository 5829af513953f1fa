import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochlattice.dynamics import (Forcing, IntegrationError, NuProfile, SystemParams,
                                   check_tempered, cocycle_phi, diag_E, diag_G1, diag_G2,
                                   energy_inequality, evolve_rows, integrate, rhs_F, rhs_terms,
                                   tempered_decay_rate)
from stochlattice.lattice import LatticeVec, apply_A, signed_pow
from stochlattice.noise import NoisePath, coarsen, ou_attach, sample_wiener, theta_shift, z_at


@pytest.fixture(scope="module")
def path():
    return ou_attach(sample_wiener(7, -30.0, 10.0, 1e-3))


def flat_path(t_min, t_max, dt):
    n = int(round((t_max - t_min) / dt)) + 1
    return NoisePath(t_min, t_max, dt, np.zeros(n), np.zeros(n))


ZERO_NU = NuProfile("constant", nu0=0.0)


# -- parameters and forcing ----------------------------------------------------

@pytest.mark.parametrize("kw", [dict(p=1.5), dict(q=0.5), dict(lambda0=2.5),
                                dict(lambda1=1.6), dict(beta=0.0), dict(lam=-1.0)])
def test_params_reject(kw):
    with pytest.raises(ValueError):
        SystemParams(**kw)


def test_nu_profiles_in_bounds():
    t = np.linspace(-20, 20, 401)
    for nu in (NuProfile(), NuProfile("sine", 2.0, freq=3.0),
               NuProfile("piecewise", 1.0, breakpoints=(0.0, 5.0), values=(0.2, 1.0, 0.0))):
        vals = nu(t)
        assert np.all(vals >= 0) and np.all(vals <= nu.nu0)
    with pytest.raises(ValueError):
        NuProfile("piecewise", 1.0, breakpoints=(0.0,), values=(2.0, 0.5))


def test_forcing_dissipativity_witness(params):
    for f in (Forcing(), Forcing(amplitude=3.0, profile="gaussian", gamma=0.3),
              Forcing(family="zero")):
        assert f.check_dissipativity(params, n_samples=500, seed=1)
    assert Forcing().check_dissipativity(SystemParams(q=2.5), n_samples=500, seed=2)


def test_forcing_derivative_bound(params, rng):
    f = Forcing()
    R = 3.0
    u = rng.uniform(-R, R, 2000)
    du = params.beta * (params.q - 1) * np.abs(u) ** (params.q - 2)
    assert np.all(du <= f.psi5(params, R) * (1 + 1e-12))


def test_forcing_validation():
    with pytest.raises(ValueError):
        Forcing(family="cubic")
    with pytest.raises(ValueError):
        Forcing().validate(SystemParams(q=1.0))
    with pytest.raises(ValueError):
        Forcing().validate(SystemParams(q=1.5))
    Forcing(kappa0=0.1, Lambda=1.0, t0=1.0).validate(SystemParams(q=1.5))


def test_assumption_report_flags_psi3():
    rep = Forcing().assumption_report(SystemParams())
    assert rep["F1_dissipative"] and not rep["F3_psi3_l1"]
    assert Forcing(family="zero").assumption_report(SystemParams())["F3_psi3_l1"]


# -- right-hand side -----------------------------------------------------------

def test_rhs_zero_state(path, params):
    f = Forcing(amplitude=0.0)
    out = rhs_F(0.3, path, LatticeVec.zeros(4), params, f)
    assert np.all(out.values == 0.0)


def test_rhs_pure_decay(path):
    par = SystemParams(alpha=0.0, nu=ZERO_NU)
    v = LatticeVec(np.arange(-2.0, 3.0))
    out = rhs_F(1.0, path, v, par, Forcing(family="zero"))
    np.testing.assert_allclose(out.values, -par.lam * v.values, rtol=0, atol=1e-15)


def test_rhs_termwise_oracle(path, rng):
    for _ in range(20):
        par = SystemParams(p=rng.uniform(2, 4), q=rng.uniform(2, 5), alpha=rng.normal())
        f = Forcing(amplitude=rng.uniform(0, 2), gamma=rng.uniform(0, 3))
        t = float(np.round(rng.uniform(-5, 5), 3))
        v = rng.standard_normal(11)
        z = z_at(path, t)
        e = math.exp(par.alpha * z)
        diff = -math.exp(par.alpha * (par.p - 2) * z) * par.nu(t) * apply_A(v, par.p)
        lin = (par.alpha * z - par.lam) * v
        g = f.g(5) * math.sin(f.gamma * t)
        forced = (g - par.beta * signed_pow(e * v, par.q - 1)) / e
        out = rhs_F(t, path, LatticeVec(v), par, f).values
        np.testing.assert_allclose(out, diff + lin + forced, rtol=1e-12, atol=1e-12)


def test_kernel_matches_numpy_heun(path, params, forcing, rng):
    v0 = rng.standard_normal(17)
    traj = integrate(LatticeVec(v0), -1.0, -0.7, path, params, forcing)
    v = v0.copy()
    z = path.z_values
    k0 = path.index(-1.0)
    dt = path.dt
    for k in range(300):
        t = -1.0 + k * dt
        k1 = sum(rhs_terms(t, z[k0 + k], v, params, forcing))
        k2 = sum(rhs_terms(t + dt, z[k0 + k + 1], v + dt * k1, params, forcing))
        v = v + 0.5 * dt * (k1 + k2)
    np.testing.assert_allclose(traj.v[-1], v, rtol=1e-12, atol=1e-12)


# -- integrate -------------------------------------------------------------------

def test_integrate_zero_length(path, params, forcing):
    u0 = LatticeVec(np.ones(5))
    traj = integrate(u0, 0.5, 0.5, path, params, forcing)
    assert traj.v.shape == (1, 5)
    np.testing.assert_array_equal(traj.v[0], u0.values)


def test_scalar_linear_decay():
    par = SystemParams(alpha=0.0, nu=ZERO_NU)
    path = flat_path(-1.0, 4.0, 1e-3)
    traj = integrate(LatticeVec([2.0]), 0.0, 3.0, path, par, Forcing(family="zero"))
    exact = 2.0 * np.exp(-par.lam * (traj.times - 0.0))
    assert np.max(np.abs(traj.v[:, 0] - exact)) < 1e-6


def test_conjugation_identity(path, params, forcing, rng):
    traj = integrate(LatticeVec(rng.standard_normal(9)), 0.0, 2.0, path, params, forcing)
    expect = np.exp(params.alpha * traj.z)[:, None] * traj.v
    np.testing.assert_allclose(traj.u, expect, rtol=1e-12, atol=0)


def test_blowup_raises(params, forcing):
    coarse = ou_attach(sample_wiener(1, -1.0, 5.0, 0.25))
    with pytest.raises(IntegrationError):
        integrate(LatticeVec(np.full(9, 30.0)), 0.0, 5.0, coarse, params, forcing)


def test_out_of_grid(path, params, forcing):
    with pytest.raises(ValueError):
        integrate(LatticeVec(np.ones(3)), 0.0, 20.0, path, params, forcing)
    with pytest.raises(ValueError):
        integrate(LatticeVec(np.ones(3)), 1.0, 0.0, path, params, forcing)


def test_step_halving_order(params, forcing):
    # pathwise order is 1 with a random constant, so compare ensemble RMS errors
    errs = []
    u0 = LatticeVec(np.linspace(-2, 2, 17))
    for seed in range(24):
        fine = ou_attach(sample_wiener(100 + seed, -2.0, 2.0, 2.5e-4))
        ends = [integrate(u0, 0.0, 1.0, coarsen(fine, k, keep_z=True), params, forcing).v[-1]
                for k in (1, 2, 4, 8, 16)]
        errs.append([np.linalg.norm(a - b) for a, b in zip(ends, ends[1:])])
    rms = np.sqrt(np.mean(np.square(errs), axis=0))
    assert (rms[-1] / rms[0]) ** (1 / 3) >= 1.8


# -- cocycle ----------------------------------------------------------------------

def test_cocycle_identity_at_zero(path, params, forcing, rng):
    x = LatticeVec(rng.standard_normal(7))
    np.testing.assert_allclose(cocycle_phi(0.0, 1.3, path, x, params, forcing).values,
                               x.values, rtol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1500), st.integers(0, 1500), st.integers(-5000, 3000))
def test_cocycle_composition(ti, si, taui):
    path = ou_attach(sample_wiener(21, -12.0, 12.0, 1e-3))
    params, forcing = SystemParams(), Forcing()
    t, s, tau = ti * 1e-3, si * 1e-3, taui * 1e-3
    x = LatticeVec(np.sin(np.arange(-6, 7.0)))
    whole = cocycle_phi(t + s, tau, path, x, params, forcing)
    mid = cocycle_phi(s, tau, path, x, params, forcing)
    parts = cocycle_phi(t, tau + s, theta_shift(path, s), mid, params, forcing)
    err = np.linalg.norm(whole.values - parts.values)
    assert err <= 1e-3 * max(np.linalg.norm(whole.values), 1e-12)


def test_cocycle_lipschitz_in_state(path, params, forcing, rng):
    x = rng.standard_normal(9)
    base = cocycle_phi(2.0, 0.0, path, LatticeVec(x), params, forcing).values
    ratios = []
    for delta in (1e-2, 1e-3, 1e-4):
        d = rng.standard_normal(9)
        d *= delta / np.linalg.norm(d)
        moved = cocycle_phi(2.0, 0.0, path, LatticeVec(x + d), params, forcing).values
        ratios.append(np.linalg.norm(moved - base) / delta)
    assert max(ratios) < 10.0


def test_cocycle_batch_matches_single(path, params, forcing, rng):
    xs = rng.standard_normal((4, 9))
    batch = cocycle_phi(1.0, -2.0, path, xs, params, forcing)
    for row, x in zip(batch, xs):
        single = cocycle_phi(1.0, -2.0, path, LatticeVec(x), params, forcing)
        np.testing.assert_array_equal(row, single.values)


# -- staggered batches ---------------------------------------------------------

def test_evolve_rows_matches_integrate(path, params, forcing, rng):
    u0 = rng.standard_normal((3, 9))
    starts = [-1.0, 0.0, -0.5]
    alphas = [0.5, -0.3, 0.0]
    out = evolve_rows(u0, starts, 1.0, path, params, forcing, alphas=alphas)
    for r in range(3):
        par = params.with_alpha(alphas[r])
        v0 = np.exp(-alphas[r] * z_at(path, starts[r])) * u0[r]
        traj = integrate(LatticeVec(v0), starts[r], 1.0, path, par, forcing)
        np.testing.assert_allclose(out[r], traj.u[-1], rtol=1e-13, atol=1e-14)


def test_evolve_rows_records(path, params, forcing, rng):
    u0 = rng.standard_normal((2, 5))
    rec = evolve_rows(u0, [0.0, 0.5], 1.0, path, params, forcing,
                      record_times=[0.25, 1.0])
    assert np.all(np.isnan(rec[0, 1])) and np.all(np.isfinite(rec[0, 0]))
    end = evolve_rows(u0, [0.0, 0.5], 1.0, path, params, forcing)
    np.testing.assert_array_equal(rec[1], end)


def test_evolve_rows_threads_deterministic(path, params, forcing, rng):
    u0 = rng.standard_normal((12, 9))
    starts = list(np.round(np.linspace(-2, 0, 12), 3))
    one = evolve_rows(u0, starts, 0.5, path, params, forcing)
    three = evolve_rows(u0, starts, 0.5, path, params, forcing, threads=3)
    np.testing.assert_array_equal(one, three)


def test_merge_keeps_result_close(path, params, forcing):
    u0 = np.zeros((20, 9))
    starts = list(np.linspace(-20, -1, 20))
    plain = evolve_rows(u0, starts, 0.0, path, params, forcing)
    merged = evolve_rows(u0, starts, 0.0, path, params, forcing, merge_tol=1e-12)
    np.testing.assert_allclose(merged, plain, atol=1e-9)


# -- energy bounds -----------------------------------------------------------------

def test_energy_inequality_along_trajectories(path, rng):
    for _ in range(5):
        par = SystemParams(alpha=rng.uniform(-1, 1), q=rng.uniform(2, 5))
        f = Forcing(amplitude=rng.uniform(0, 2))
        traj = integrate(LatticeVec(rng.standard_normal(21) * 2), -3.0, 1.0, path, par, f)
        left, right = energy_inequality(traj)
        assert np.all(right - left >= -2e-2 * np.maximum(right, 1.0))


def test_G1_trivial_cases(path, params):
    zero = Forcing(family="zero")
    assert diag_G1(0.0, 0.0, 2.0, path, 1.5, params, zero, 8) == pytest.approx(2.25)
    # constant forcing with phase pi/2 gives a flat ||psi_1||_1
    f = Forcing(gamma=0.0, phase=math.pi / 2)
    c = float(f.psi1_l1(0.0, params, 8))
    g1 = diag_G1(0.0, 0.0, 2.0, path, 1.5, params, f, 8)
    assert g1 == pytest.approx(2.25 + 2 * c * 2.0, rel=1e-12)


def test_G1_bounds_trajectory(path, rng):
    for alpha in (-0.8, 0.0, 0.6):
        par = SystemParams(alpha=alpha)
        f = Forcing()
        u0 = rng.standard_normal(17)
        v0 = np.exp(-alpha * z_at(path, -2.0)) * u0
        traj = integrate(LatticeVec(v0), -2.0, 1.0, path, par, f)
        g1 = diag_G1(alpha, -2.0, 1.0, path, np.linalg.norm(u0), par, f, 8)
        assert np.max(np.sum(traj.v**2, axis=1)) <= g1 * (1 + 1e-2)
        g2 = diag_G2(alpha, -2.0, 1.0, path, np.linalg.norm(u0), par, f, 8)
        vq = np.sum(np.abs(traj.v) ** par.q, axis=1)
        assert np.trapezoid(vq, dx=path.dt) <= g2
    assert math.isinf(diag_E(0.0, 0.0, 1.0, path, SystemParams(), Forcing(family="zero")))


# -- temperedness --------------------------------------------------------------------

def test_tempered_constant_radius(path):
    hist = {-float(k): 3.0 for k in range(0, 26)}
    assert check_tempered(hist, 0.0, path, 1.5)


def test_not_tempered_when_growing(path):
    hist = {-float(k): math.exp(1.5 * k / 2) for k in range(0, 26)}
    assert not check_tempered(hist, 0.0, path, 1.5)


def test_tempered_random_radii(path, rng):
    hist = {-float(k): rng.uniform(0.5, 2.0) for k in range(0, 26)}
    assert check_tempered(hist, 0.7, path, 1.5)
    rate = tempered_decay_rate(hist, 0.7, path, 1.5)
    assert rate == pytest.approx(1.5, abs=0.3)


def test_alpha_continuity_on_matched_noise(path, params, forcing, rng):
    u0 = rng.standard_normal((6, 17))
    base = evolve_rows(u0, [-3.0] * 6, 0.0, path, params, forcing,
                       alphas=[0.3] * 6)
    gaps = []
    for n in range(1, 9):
        a = 0.3 + 2.0**-n
        other = evolve_rows(u0, [-3.0] * 6, 0.0, path, params, forcing, alphas=[a] * 6)
        gaps.append(np.max(np.linalg.norm(other - base, axis=1)))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
