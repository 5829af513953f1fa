import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochlattice.noise import (NoisePath, coarsen, load_path, ou_attach, path_digest, refine,
                                sample_wiener, save_path, theta_shift, z_at)


@pytest.fixture(scope="module")
def path():
    return ou_attach(sample_wiener(5, -4.0, 4.0, 0.01, burn_in=5.0))


def test_w_vanishes_at_zero(path):
    assert path.w_values[path.origin] == 0.0
    assert path.w_at(0.0) == 0.0


def test_same_seed_same_path():
    a = ou_attach(sample_wiener(3, -1.0, 1.0, 0.01))
    b = ou_attach(sample_wiener(3, -1.0, 1.0, 0.01))
    assert path_digest(a) == path_digest(b)
    c = ou_attach(sample_wiener(4, -1.0, 1.0, 0.01))
    assert path_digest(a) != path_digest(c)


def test_grid_validation():
    with pytest.raises(ValueError):
        sample_wiener(0, 0.5, 1.0, 0.01)
    with pytest.raises(ValueError):
        sample_wiener(0, -1.0, 1.0, 0.3)
    with pytest.raises(ValueError):
        NoisePath(-1.0, 1.0, 0.5, np.zeros(4))


def test_ou_recursion_matches_direct_sum(path):
    # z_k = a^k z_0 + b sum_j a^{k-1-j} dW_j
    dt = path.dt
    a, b = math.exp(-dt), math.exp(-dt / 2)
    dw = np.diff(path.w_values)
    k = 250
    direct = a**k * path.z_values[0] + b * np.sum(a ** (k - 1 - np.arange(k)) * dw[:k])
    assert path.z_values[k] == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_shift_zero_is_identity(path):
    s = theta_shift(path, 0.0)
    np.testing.assert_array_equal(s.w_values, path.w_values)
    assert s.t_min == path.t_min


def test_shift_definition(path):
    s = theta_shift(path, 1.5)
    for t in (-2.0, -0.37, 0.0, 1.2, 2.5):
        assert s.w_at(t) == pytest.approx(path.w_at(t + 1.5) - path.w_at(1.5), abs=1e-14)
        assert z_at(s, t) == z_at(path, t + 1.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(-150, 150), st.integers(-150, 150))
def test_shift_group_law(i, j):
    path = ou_attach(sample_wiener(2, -4.0, 4.0, 0.01, burn_in=1.0))
    s, t = i * 0.01, j * 0.01
    if not path.covers(s + t, s + t) or not path.covers(s, s):
        return
    once = theta_shift(path, s + t)
    twice = theta_shift(theta_shift(path, s), t)
    np.testing.assert_allclose(once.w_values, twice.w_values, atol=1e-13)
    np.testing.assert_array_equal(once.z_values, twice.z_values)
    assert once.t_min == pytest.approx(twice.t_min)


def test_off_grid_shift_interpolates(path):
    s = theta_shift(path, 0.005)
    assert s.w_at(0.0) == 0.0
    assert s.w_at(0.5) == pytest.approx(path.w_at(0.505) - path.w_at(0.005), abs=1e-12)


def test_save_load_roundtrip(tmp_path, path):
    digest = save_path(path, tmp_path / "w.bin")
    back = load_path(tmp_path / "w.bin")
    assert path_digest(back) == digest
    np.testing.assert_array_equal(back.z_values, path.z_values)
    assert back.seed == path.seed and back.origin == path.origin


def test_load_rejects_truncated(tmp_path, path):
    save_path(path, tmp_path / "w.bin")
    data = (tmp_path / "w.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(data[:-8])
    with pytest.raises(ValueError):
        load_path(tmp_path / "bad.bin")


def test_coarsen_shares_w(path):
    c = coarsen(path, 4)
    np.testing.assert_array_equal(c.w_values, path.w_values[::4])
    assert c.z_values[0] == path.z_values[0]
    kept = coarsen(path, 4, keep_z=True)
    np.testing.assert_array_equal(kept.z_values, path.z_values[::4])
    with pytest.raises(ValueError):
        coarsen(path, 3)


def test_refine_agrees_on_old_grid(path):
    f = refine(path)
    assert f.dt == path.dt / 2
    np.testing.assert_array_equal(f.w_values[::2], path.w_values)
    assert path_digest(refine(path)) == path_digest(f)


def test_require_z():
    bare = sample_wiener(0, -1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        bare.require_z()
