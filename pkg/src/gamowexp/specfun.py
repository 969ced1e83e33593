"""Exponential integrals E_1, E_1/2 and the pole-term function

    E(u, t) = int_0^inf exp(-p t) / (sqrt(p) - u) dp
            = sqrt(pi/t) + exp(-u^2 t) (u^2 sqrt(pi t) E_1/2(-u^2 t) + u E_1(-u^2 t)).

All branches are principal (cut along the negative real axis).
"""
from __future__ import annotations

import numpy as np
from scipy import integrate, special

EULER = 0.57721566490153286061
SERIES_RADIUS = 2.0
CF_MAXIT = 20000


class QuadratureError(RuntimeError):
    pass


def _on_cut(z: complex) -> bool:
    return z.imag == 0 and z.real < 0


def _series(n: float, z: complex) -> complex:
    """E_n(z) for n in {1, 1/2} from the power series (converges everywhere)."""
    s = 0j
    term = 1 + 0j          # (-z)^k / k!
    k = 0
    while True:
        if n == 1:
            if k > 0:
                s += term / k
        else:
            s += term / (k + 1 - n)
        k += 1
        term *= -z / k
        if abs(term) < 1e-17 * max(abs(s), 1e-300) and k > abs(z):
            break
        if k > 2000:
            break
    if n == 1:
        return -EULER - np.log(z) - s
    return np.sqrt(np.pi) / np.sqrt(z) - s


def _lentz(n: float, z: complex) -> complex:
    """exp(z) E_n(z) from the continued fraction (modified Lentz)."""
    tiny = 1e-300
    b = z + n
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, CF_MAXIT):
        an = -i * (n - 1 + i)
        b += 2
        d = an * d + b
        d = 1 / (d if d != 0 else tiny)
        c = b + an / c
        if c == 0:
            c = tiny
        delta = c * d
        h *= delta
        if abs(delta - 1) < 1e-16:
            return h
    raise ArithmeticError(f"continued fraction for E_{n}({z}) did not converge")


def exp_integral(n: float, z, side: int = 0, scaled: bool = False) -> complex:
    """E_n(z) for n in {1, 1/2}; scaled=True returns exp(z) E_n(z).

    On the negative real axis side = +1 / -1 selects the limit from above / below.
    """
    if n not in (1, 0.5):
        raise ValueError("n must be 1 or 1/2")
    z = complex(z)
    if z == 0:
        raise ValueError("E_n has a singularity at z = 0")
    if _on_cut(z):
        if side == 0:
            raise ValueError("z on the negative real axis: choose side = +1 or -1")
        if side < 0:
            # E_n(conj z) = conj E_n(z) for real n
            return np.conj(_eval(n, z, scaled))
    return _eval(n, z, scaled)


def _eval(n: float, z: complex, scaled: bool) -> complex:
    # numpy's principal log/sqrt put z on the cut onto the upper side
    if abs(z) < SERIES_RADIUS:
        v = _series(n, z)
        return v * np.exp(z) if scaled else v
    try:
        v = _lentz(n, z)
    except ArithmeticError:
        v = _series(n, z) * np.exp(z)
    return v if scaled else v * np.exp(-z)


def exp_half_erfc(z, scaled: bool = False) -> complex:
    """E_1/2(z) = sqrt(pi/z) erfc(sqrt z), through the scaled erfc (no cancellation)."""
    z = complex(z)
    if z == 0:
        raise ValueError("E_n has a singularity at z = 0")
    r = np.sqrt(z)
    v = np.sqrt(np.pi) / r * special.erfcx(r)
    return v if scaled else v * np.exp(-z)


def _check_pole_input(u: complex, t: float):
    if t <= 0:
        raise ValueError("t must be positive")
    if u.imag == 0:
        raise ValueError("u must be off the real axis")


def pole_term_E(u, t: float) -> complex:
    """Closed form of int_0^inf exp(-p t) / (sqrt(p) - u) dp for u off the real axis."""
    u = complex(u)
    t = float(t)
    _check_pole_input(u, t)
    z = -u * u * t
    half = exp_half_erfc(z, scaled=True)
    one = exp_integral(1, z, scaled=True)
    return np.sqrt(np.pi / t) + u * u * np.sqrt(np.pi * t) * half + u * one


def pole_term_E_series(u, t: float) -> complex:
    """Same closed form with E_1/2 taken from the series / continued fraction."""
    u = complex(u)
    t = float(t)
    _check_pole_input(u, t)
    z = -u * u * t
    return (np.sqrt(np.pi / t) + u * u * np.sqrt(np.pi * t) * exp_integral(0.5, z, scaled=True)
            + u * exp_integral(1, z, scaled=True))


def _cquad(f, a, b, rtol):
    kw = dict(epsabs=0.0, epsrel=rtol, limit=400)
    re, er = integrate.quad(lambda s: f(s).real, a, b, **kw)
    im, ei = integrate.quad(lambda s: f(s).imag, a, b, **kw)
    return complex(re, im), float(np.hypot(er, ei))


def pole_term_quadrature(u, t: float, rtol: float = 1e-10, variable: str = "p") -> complex:
    """Adaptive Gauss-Kronrod value of the pole-term integral.

    variable = "p": the integral in p, split at |u|^2.
    variable = "s": after p = s^2, sqrt(pi/t) + 2u int_0^inf exp(-s^2 t)/(s - u) ds, split at |u|.
    """
    u = complex(u)
    t = float(t)
    if t <= 0:
        raise ValueError("t must be positive")
    if u.imag == 0 and u.real >= 0:
        raise ValueError("u must be off the positive real axis")
    with np.errstate(over="ignore", under="ignore"):
        if variable == "p":
            f = lambda p: np.exp(-p * t) / (np.sqrt(p) - u)
            cut = abs(u) ** 2
            tail_end = np.inf
            base = 0j
        elif variable == "s":
            f = lambda s: 2 * u * np.exp(-s * s * t) / (s - u)
            cut = abs(u)
            tail_end = np.inf
            base = np.sqrt(np.pi / t)
        else:
            raise ValueError("variable must be 'p' or 's'")
        # break the near-singular stretch around |u| into pieces of width |Im u|
        width = max(abs(u.imag), 1e-3 * max(cut, 1e-3))
        pts = sorted({0.0, *(x for x in np.linspace(cut - 4 * width, cut + 4 * width, 9) if x > 0)})
        total, err = 0j, 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            v, e = _cquad(f, a, b, rtol)
            total += v
            err += e
        v, e = _cquad(f, pts[-1], tail_end, rtol)
        total += v
        err += e
    value = base + total
    if not np.isfinite(value) or err > 1e3 * rtol * max(abs(value), 1e-300):
        raise QuadratureError(f"quadrature did not converge (error estimate {err:.3g})")
    return value
