import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from gamowexp.specfun import (exp_half_erfc, exp_integral, pole_term_E, pole_term_E_series,
                              pole_term_quadrature)

mpmath.mp.dps = 30


def mp_expint(n, z):
    return complex(mpmath.expint(mpmath.mpf(n), mpmath.mpc(z.real, z.imag)))


def test_e1_at_one():
    assert exp_integral(1, 1.0) == pytest.approx(0.21938393439552026, rel=1e-15)


def test_e1_on_positive_axis_matches_scipy():
    for x in np.geomspace(1e-6, 600, 40):
        assert abs(exp_integral(1, x) - special.exp1(x)) <= 1e-13 * special.exp1(x)


def test_half_order_identity():
    for z in (1.0, 0.3 + 2j, -3 + 0.5j, 20 - 40j, 1e-5j + 1e-5):
        a = exp_integral(0.5, z)
        assert abs(a - exp_half_erfc(z)) < 1e-12 * abs(a)


def test_small_argument_series():
    z = 1e-6 * np.exp(0.4j)
    expected = -np.euler_gamma - np.log(z) + z - z * z / 4
    assert abs(exp_integral(1, z) - expected) < 1e-15 * abs(expected)


@settings(max_examples=150, deadline=None)
@given(st.floats(-6, 4), st.floats(-np.pi + 1e-3, np.pi - 1e-3), st.sampled_from([1, 0.5]))
def test_against_mpmath(lr, th, n):
    z = 10 ** lr * np.exp(1j * th)
    ref = mp_expint(n, z)
    scaled_ref = complex(mpmath.exp(mpmath.mpc(z.real, z.imag)) * mpmath.expint(n, mpmath.mpc(z.real, z.imag)))
    assert abs(exp_integral(n, z, scaled=True) - scaled_ref) <= 1e-12 * abs(scaled_ref)
    if np.isfinite(ref) and abs(ref) > 1e-290:
        assert abs(exp_integral(n, z) - ref) <= 1e-11 * abs(ref)


def test_branch_jump_on_negative_axis():
    up = exp_integral(1, -1.0, side=+1)
    down = exp_integral(1, -1.0, side=-1)
    assert abs(up - (-special.expi(1.0) - 1j * np.pi)) < 1e-14
    assert abs(up - down + 2j * np.pi) < 1e-14
    for n in (1, 0.5):
        eps = 1e-25
        assert abs(exp_integral(n, -1.0, side=+1) - mp_expint(n, complex(-1, eps))) < 1e-13
        assert abs(exp_integral(n, -1.0, side=-1) - mp_expint(n, complex(-1, -eps))) < 1e-13


def test_pole_term_against_both_quadratures():
    u, t = np.exp(0.25j * np.pi), 5.0
    e = pole_term_E(u, t)
    assert abs(e - pole_term_quadrature(u, t, variable="p")) < 1e-9 * abs(e)
    assert abs(e - pole_term_quadrature(u, t, variable="s")) < 1e-9 * abs(e)
    assert abs(e - pole_term_E_series(u, t)) < 1e-12 * abs(e)


def test_pole_term_at_imaginary_unit():
    a = pole_term_quadrature(1j, 2.0, variable="p")
    b = pole_term_quadrature(1j, 2.0, variable="s")
    assert abs(a - b) < 1e-9 * abs(a)
    assert abs(pole_term_E(1j, 2.0) - a) < 1e-9 * abs(a)


def test_pole_term_scaling():
    # p -> lam^2 p maps E(u, t) to lam E(u / lam, lam^2 t)
    lam = 2.0
    for u in (0.7 - 1.1j, -2 + 0.5j, 3j):
        for t in (0.3, 4.0):
            a, b = pole_term_E(u, t), lam * pole_term_E(u / lam, lam * lam * t)
            assert abs(a - b) < 1e-10 * abs(a)


def test_pole_term_large_t():
    u = 1.5 * np.exp(2.0j)
    for t in (1e2, 1e4, 1e6):
        ratio = pole_term_E(u, t) * (-u * t)
        assert abs(ratio - 1) < 2 / (abs(u) * np.sqrt(t))


def test_pole_term_large_u():
    for r in (1e2, 1e3, 1e4):
        u = r * np.exp(-1.0j)
        assert abs(pole_term_E(u, 1.0) * (-u) - 1) < 2 / r


def test_pole_term_conjugation():
    for u in (0.4 + 0.9j, -3 - 0.2j):
        assert abs(pole_term_E(np.conj(u), 1.7) - np.conj(pole_term_E(u, 1.7))) < 1e-14 * abs(pole_term_E(u, 1.7))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 4.0), st.floats(0.05, 0.95), st.booleans(), st.floats(0.5, 30.0))
def test_pole_term_property(r, frac, upper, t):
    ang = np.pi * frac * (1 if upper else -1)
    u = r * np.exp(1j * ang)
    e = pole_term_E(u, t)
    q = pole_term_quadrature(u, t, variable="s")
    assert abs(e - q) <= 1e-8 * abs(q)


@pytest.mark.parametrize("call", [
    lambda: exp_integral(2, 1.0),
    lambda: exp_integral(1, 0.0),
    lambda: exp_integral(1, -2.0),
    lambda: exp_half_erfc(0.0),
    lambda: pole_term_E(1 + 1j, 0.0),
    lambda: pole_term_E(2.0, 1.0),
    lambda: pole_term_quadrature(1.0, 1.0),
    lambda: pole_term_quadrature(1j, -1.0),
    lambda: pole_term_quadrature(1j, 1.0, variable="q"),
])
def test_bad_input(call):
    with pytest.raises(ValueError):
        call()
