from math import factorial

import numpy as np
import pytest
from scipy import integrate, optimize

from gamowexp.problem import square_barrier
from gamowexp.resolvent import (PoleProximityError, TaylorError, kappa_taylor, resolvent, resolvent_at,
                                zero_energy_resonance_test)
from gamowexp.spectrum import gamow_kappa, newton_kappa
from gamowexp.squarewell import SquareProblem, wronskian_closed_form

A, B = -0.5, 0.5


def free_resolvent(kappa, x):
    """Hand-integrated transform for V = 0 and psi_0 the indicator of [A, B]."""
    if A < x < B:
        return 0.5j / kappa ** 2 * (np.exp(kappa * (x - B)) + np.exp(kappa * (A - x)) - 2)
    if x >= B:
        return -0.5j / kappa ** 2 * np.exp(-kappa * x) * (np.exp(kappa * B) - np.exp(kappa * A))
    return -0.5j / kappa ** 2 * np.exp(kappa * x) * (np.exp(-kappa * A) - np.exp(-kappa * B))


def test_free_closed_form(free, rng):
    for _ in range(10):
        k = complex(*rng.uniform(-3, 3, 2))
        for x in (-2.0, -0.2, 0.3, 3.0):
            v = resolvent_at(free, k, x).value
            assert abs(v - free_resolvent(k, x)) < 1e-10 * max(1, abs(v))


def test_reduced_formula_outside_support(barrier):
    # for x > M only y- enters: psi_hat = -(i exp(-kappa x)/W) int y- psi_0
    sq = SquareProblem(1.0)
    k = complex(0.9, -0.7)
    q = np.sqrt(1 + k * k)
    ym = lambda s: np.exp(-k) * (np.cosh(q * (s + 1)) + k * np.sinh(q * (s + 1)) / q)
    re = integrate.quad(lambda s: ym(s).real, A, B, epsabs=1e-14, epsrel=1e-13)[0]
    im = integrate.quad(lambda s: ym(s).imag, A, B, epsabs=1e-14, epsrel=1e-13)[0]
    W = complex(wronskian_closed_form(sq, kappa=k))
    expected = -1j * np.exp(-k * 8.0) / W * complex(re, im)
    got = resolvent_at(barrier, k, 8.0)
    assert abs(got.value - expected) < 1e-11 * abs(expected)
    assert abs(got.wronskian - W) < 1e-12 * abs(W)


def test_large_p_behaves_like_psi0_over_p(barrier):
    errs = []
    for r in (10.0, 20.0, 40.0):
        k = r * np.exp(-0.25j * np.pi)           # p = i kappa^2 = r^2 > 0
        p = 1j * k * k
        v = resolvent_at(barrier, k, 0.0).value
        errs.append(abs(p * v - 1.0))
        assert errs[-1] < 2.0 / r
    assert errs[2] < errs[0]


def test_pole_proximity_error(barrier):
    k0, _ = newton_kappa(barrier, gamow_kappa(complex(-1.7, -0.8)))
    with pytest.raises(PoleProximityError) as exc:
        resolvent_at(barrier, k0, 2.0)
    assert abs(exc.value.nearest_pole.kappa - k0) < 1e-10


def test_kappa_zero_refused(barrier):
    with pytest.raises(ValueError):
        resolvent_at(barrier, 0.0, 1.0)


def test_free_taylor_coefficients(free):
    x = 2.0
    tay = kappa_taylor(free, x, r=1.0, J=12)
    for j in range(-2, 13):
        n = j + 2
        exact = -0.5j * ((B - x) ** n - (A - x) ** n) / factorial(n)
        assert abs(tay.laurent(j) - exact) < 1e-12


def test_taylor_doubling_self_check(barrier):
    a = kappa_taylor(barrier, 3.0, J=30, N=256)
    b = kappa_taylor(barrier, 3.0, J=30, N=512)
    js = np.arange(31)
    rel = np.abs(a.coefficients - b.coefficients) * a.r ** js / a.scale
    assert np.max(rel) < 1e-10
    assert a.doubling_error < 1e-10


def test_taylor_reconstructs_resolvent(barrier):
    tay = kappa_taylor(barrier, 1.5, J=40)
    z = 0.5 * tay.r * np.exp(2j * np.pi * np.arange(7) / 7 + 0.1j)
    direct = resolvent(barrier, z, [1.5])[:, 0]
    assert np.max(np.abs(tay(z) - direct) / np.abs(direct)) < 1e-8


def test_taylor_refuses_circle_with_zero(barrier):
    with pytest.raises(TaylorError):
        kappa_taylor(barrier, 1.0, r=1.5, J=10)


def test_threshold_flag(free, barrier):
    assert zero_energy_resonance_test(free)[0]
    flag, w0 = zero_energy_resonance_test(barrier)
    assert not flag
    sq = SquareProblem(1.0)
    assert abs(w0 - complex(wronskian_closed_form(sq, kappa=1e-9))) < 1e-7


def test_threshold_flag_for_tuned_well():
    # W(0) changes sign as the first odd state crosses the threshold
    f = lambda d: zero_energy_resonance_test(square_barrier(-d))[1].real
    d = optimize.brentq(f, 2.0, 3.0, xtol=1e-14)
    assert abs(d - np.pi ** 2 / 4) < 1e-8
    assert zero_energy_resonance_test(square_barrier(-d))[0]
    assert not zero_energy_resonance_test(square_barrier(-2.3))[0]
