import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochlattice.testfunctions import (BUMP_SLOPE_MAX, CylTestFunction, TestFunctionDict,
                                        bump, bump_d1, bump_d2, direction_vectors,
                                        van_der_corput)


def test_bump_shape():
    y = np.linspace(-30, 30, 20001)
    assert bump(0.0) == pytest.approx(1.0)
    assert np.all(bump(y) > 0) and np.all(bump(y) <= 1.0)
    assert np.max(np.abs(bump_d1(y))) == pytest.approx(BUMP_SLOPE_MAX, rel=1e-6)


@given(st.floats(-20, 20))
def test_bump_derivatives_match_finite_differences(y):
    h = 1e-5
    assert bump_d1(y) == pytest.approx((bump(y + h) - bump(y - h)) / (2 * h), abs=1e-8)
    assert bump_d2(y) == pytest.approx((bump_d1(y + h) - bump_d1(y - h)) / (2 * h), abs=1e-8)


def _random_function(rng, m=3, n=9, scale=1.3):
    return CylTestFunction(rng.standard_normal((m, n)), rng.standard_normal(m), scale=scale,
                           weight=0.7, offset=0.1)


def test_gradient_matches_finite_differences(rng):
    psi = _random_function(rng)
    X = rng.standard_normal((4, 9))
    G = psi.gradient(X)
    h = 1e-6
    for i in range(9):
        e = np.zeros(9)
        e[i] = h
        fd = (psi.evaluate(X + e) - psi.evaluate(X - e)) / (2 * h)
        np.testing.assert_allclose(G[:, i], fd, atol=1e-7)


def test_gradient_lies_in_span(rng):
    psi = _random_function(rng)
    G = psi.gradient(rng.standard_normal((5, 9)))
    Q, _ = np.linalg.qr(psi.directions.T)
    np.testing.assert_allclose(G - (G @ Q) @ Q.T, 0.0, atol=1e-12)


def test_hessian_form_matches_second_difference(rng):
    psi = _random_function(rng)
    X = rng.standard_normal((3, 9))
    a = rng.standard_normal(9)
    b = rng.standard_normal(9)
    h = 1e-4
    fd = (psi.evaluate(X + h * a + h * b) - psi.evaluate(X + h * a - h * b)
          - psi.evaluate(X - h * a + h * b) + psi.evaluate(X - h * a - h * b)) / (4 * h * h)
    np.testing.assert_allclose(psi.hessian_form(X, a, b), fd, atol=1e-5)


def test_frechet_remainder_is_second_order(rng):
    # membership in the smooth cylindrical class: |Psi(u+h) - Psi(u) - Psi'(u)h| <= C |h|^2 / 2
    psi = _random_function(rng)
    u = rng.standard_normal((1, 9))
    for _ in range(50):
        h = rng.standard_normal(9) * 10.0 ** rng.uniform(-4, 0)
        rem = abs(psi.evaluate(u + h)[0] - psi.evaluate(u)[0] - psi.gradient(u)[0] @ h)
        assert rem <= 0.5 * psi.hessian_bound() * (h @ h) + 1e-14


def test_lipschitz_bound_holds(rng):
    psi = _random_function(rng)
    X = rng.standard_normal((200, 9)) * 3
    Y = X + rng.standard_normal((200, 9)) * 0.1
    lhs = np.abs(psi.evaluate(X) - psi.evaluate(Y))
    assert np.all(lhs <= psi.lipschitz_bound() * np.linalg.norm(X - Y, axis=1) + 1e-15)
    assert np.all(np.abs(psi.evaluate(X)) <= psi.sup_norm())


def test_call_accepts_lattice_vectors(rng):
    from stochlattice.lattice import LatticeVec
    psi = _random_function(rng, n=9)
    x = rng.standard_normal(9)
    assert psi(LatticeVec(x)) == psi(x) == psi.evaluate(x[None])[0]


def test_center_count_must_match():
    with pytest.raises(ValueError):
        CylTestFunction(np.eye(3), [0.0, 1.0])
    with pytest.raises(ValueError):
        CylTestFunction(np.eye(2), [0.0, 1.0], scale=0.0)


def test_van_der_corput_prefix():
    assert [van_der_corput(k) for k in range(1, 6)] == [0.5, 0.25, 0.75, 0.125, 0.625]


def test_direction_vectors_normalized():
    D = direction_vectors(8, 32)
    np.testing.assert_allclose(np.linalg.norm(D, axis=1), 1.0, rtol=1e-14)
    assert np.argmax(D[0]) == 32


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([4, 8, 32]), st.floats(0.1, 50.0))
def test_dictionary_is_bounded_lipschitz(size, radius):
    d = TestFunctionDict.build(size, 8, radius)
    assert len(d) == size
    for f in d:
        assert f.sup_norm() == 1.0
        assert f.lipschitz_bound() < 1.0


def test_dictionary_vectorized_matches_elements(rng):
    d = TestFunctionDict.build(16, 8, 2.0)
    X = rng.standard_normal((7, 17))
    E = d.evaluate(X)
    assert E.shape == (16, 7)
    for k, f in enumerate(d):
        np.testing.assert_allclose(E[k], f.evaluate(X), rtol=1e-14)


def test_dictionary_rejects_bad_size():
    with pytest.raises(ValueError):
        TestFunctionDict.build(6, 8, 1.0)
    with pytest.raises(ValueError):
        TestFunctionDict.build(8, 8, 0.0)
