"""Laplace transform of the wave function and its expansion at the threshold kappa = 0.

With W = y+ y-' - y- y+' the transform solves p psi_hat - psi_0 = -i (H psi_hat) and reads

    psi_hat(x) = (i/W) [ y-(x) int_M^x y+ psi_0 - y+(x) int_{-M}^x y- psi_0 ].

In the scaled variables of the shooting module this is

    psi_hat(x) = -(i/W) [ u-(x) R(x) + u+(x) L(x) ],
    L(x) = int_{-M}^x exp(-kappa (x-s)) u-(s) psi_0(s) ds,
    R(x) = int_x^M  exp(-kappa (s-x)) u+(s) psi_0(s) ds,

and R is the L of the mirrored problem, so one routine computes both.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import Problem
from .shooting import SpectralPoint, as_kappa, sweep, wronskian_array

CHUNK = 2048


class PoleProximityError(RuntimeError):
    def __init__(self, msg, nearest_pole=None):
        super().__init__(msg)
        self.nearest_pole = nearest_pole


class TaylorError(RuntimeError):
    pass


@dataclass(frozen=True)
class ResolventValue:
    x: float
    kappa: SpectralPoint
    value: complex
    wronskian: complex


def _resolvent_block(prob: Problem, kappa: np.ndarray, xs: np.ndarray):
    vpw, gpw = prob.potential.pw, prob.initial.pw
    pts = np.unique(np.concatenate([xs, [1.0]]))
    um, wm, L = sweep(vpw, gpw, kappa, pts)
    i1 = np.searchsorted(pts, 1.0)
    W = wm[:, i1] + kappa * um[:, i1]
    scale = np.maximum(np.abs(wm[:, i1]), np.abs(kappa * um[:, i1]))
    idx = np.searchsorted(pts, xs)
    um, L = um[:, idx], L[:, idx]
    xr = -xs[::-1]
    ur, _, Lr = sweep(vpw.reflected(), gpw.reflected(), kappa, xr)
    up, R = ur[:, ::-1], Lr[:, ::-1]
    num = um * R + up * L
    return -1j * num / W[:, None], W, scale


def resolvent(prob: Problem, kappa, x, return_wronskian: bool = False):
    """psi_hat(x, p = i kappa^2) for arrays of kappa and x; shape (len(kappa), len(x))."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(x)
    xs = x[order]
    out = np.empty((kappa.size, x.size), dtype=complex)
    Wout = np.empty(kappa.size, dtype=complex)
    # group by |kappa| so quadrature refinement follows the local scale
    korder = np.argsort(np.abs(kappa))
    for s in range(0, kappa.size, CHUNK):
        sel = korder[s:s + CHUNK]
        val, W, _ = _resolvent_block(prob, kappa[sel], xs)
        out[np.ix_(sel, order)] = val
        Wout[sel] = W
    if return_wronskian:
        return out, Wout
    return out


def resolvent_at(prob: Problem, kappa, x: float, tol: float = 1e-13) -> ResolventValue:
    """Single value with a pole-proximity guard."""
    k = as_kappa(kappa)
    if k == 0:
        raise ValueError("kappa = 0: use kappa_taylor")
    xs = np.array([float(x)])
    val, W, scale = _resolvent_block(prob, np.array([k]), xs)
    if abs(W[0]) < tol * scale[0]:
        h = 1e-6 * max(1.0, abs(k))
        Wp = (wronskian_array(prob, [k + h])[0] - wronskian_array(prob, [k - h])[0]) / (2 * h)
        kp = k - W[0] / Wp
        raise PoleProximityError(f"|W| = {abs(W[0]):.3g} at kappa = {k}", nearest_pole=SpectralPoint(kp))
    return ResolventValue(float(x), SpectralPoint(k), complex(val[0, 0]), complex(W[0]))


# ---------------------------------------------------------------------------
# threshold expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KappaTaylor:
    """psi_hat(x, kappa) = sum_{j >= -2} a_j kappa^j on |kappa| < nearest zero of W.

    ``coefficients[j]`` is a_j for j = 0..J; ``pole_part`` holds (a_-2, a_-1).  a_-2
    vanishes (psi_hat has no 1/p singularity at threshold) and a_-1 is nonzero only
    with a zero-energy resonance.
    """
    x: float
    r: float
    coefficients: np.ndarray
    pole_part: tuple[complex, complex]
    nodes: int
    doubling_error: float
    scale: float = 1.0

    @property
    def J(self) -> int:
        return self.coefficients.size - 1

    def laurent(self, j: int) -> complex:
        if j == -2:
            return self.pole_part[0]
        if j == -1:
            return self.pole_part[1]
        return complex(self.coefficients[j])

    def __call__(self, kappa):
        k = np.asarray(kappa, dtype=complex)
        poly = np.polynomial.polynomial.polyval(k, self.coefficients)
        return poly + self.pole_part[1] / k + self.pole_part[0] / (k * k)


def winding_number(f_on_circle: np.ndarray) -> int:
    ph = np.unwrap(np.angle(np.concatenate([f_on_circle, f_on_circle[:1]])))
    return int(np.rint((ph[-1] - ph[0]) / (2 * np.pi)))


def _circle(r: float, N: int) -> np.ndarray:
    # offset by half a step so no node sits on the real or imaginary axis
    return r * np.exp(2j * np.pi * (np.arange(N) + 0.5) / N)


def threshold_zero_order(prob: Problem, r: float = 0.05, N: int = 256) -> int:
    """Number of zeros of W inside |kappa| < r (0, or 1 with a zero-energy resonance)."""
    return winding_number(wronskian_array(prob, _circle(r, N)))


def zero_free_radius(prob: Problem, r0: float = 0.05, grow: float = 1.05, rmax: float = 30.0, N: int = 512) -> float:
    """Largest tested radius whose disk holds no zero of W besides one at the origin."""
    base = threshold_zero_order(prob, min(r0, 1e-3))
    r = r0
    if winding_number(wronskian_array(prob, _circle(r, N))) != base:
        while r > 1e-6:
            r *= 0.5
            if winding_number(wronskian_array(prob, _circle(r, N))) == base:
                return r
        raise TaylorError("zeros of W accumulate at the threshold")
    while r * grow <= rmax:
        nr = r * grow
        n = max(N, int(64 * nr))
        if winding_number(wronskian_array(prob, _circle(nr, n))) != base:
            return r
        r = nr
    return r


def kappa_taylor(prob: Problem, x: float, r: float | None = None, J: int = 40, N: int | None = None,
                 check: bool = True, rtol: float = 1e-10, jmax_allowed: int = 160) -> KappaTaylor:
    """Laurent/Taylor coefficients of psi_hat(x, .) at kappa = 0 by trapezoidal Cauchy quadrature.

    r defaults to 0.8 times the zero-free radius, which keeps the rounding error of
    a_j (about eps * (R/r)^j) small for the high orders used by least-term summation.
    """
    if J > jmax_allowed:
        raise TaylorError(f"J = {J} exceeds {jmax_allowed}")
    base = threshold_zero_order(prob, 1e-3)
    if r is None:
        r = 0.8 * zero_free_radius(prob)
    N = max(256, 8 * J) if N is None else int(N)
    nodes = _circle(r, 2 * N)
    # no zero of W inside the circle other than at the origin
    Wc = wronskian_array(prob, nodes)
    if winding_number(Wc) != base:
        raise TaylorError(f"W has a zero inside |kappa| < {r:g}; shrink r")
    f2 = resolvent(prob, nodes, [x])[:, 0]
    f1 = f2[::2]
    # the even sub-grid is itself a shifted circle: recompute with its own phase
    nodes1 = nodes[::2]
    c1 = _laurent_generic(f1, nodes1, r, -2, J)
    c2 = _laurent_generic(f2, nodes, r, -2, J)
    fmax = float(np.max(np.abs(f2)))
    js = np.arange(-2, J + 1)
    err = float(np.max(np.abs(c2 - c1) * r ** js) / max(fmax, 1e-300))
    if check and err > rtol:
        raise TaylorError(f"doubling test failed: {err:.3g}")
    return KappaTaylor(float(x), float(r), c2[2:].copy(), (complex(c2[0]), complex(c2[1])), 2 * N, err, fmax)


def _laurent_generic(vals, nodes, r, jmin, jmax):
    N = vals.size
    js = np.arange(jmin, jmax + 1)
    theta = np.angle(nodes[0] / r)
    F = np.fft.fft(vals) / N
    phase = np.exp(-1j * theta * js)
    return F[js % N] * phase / r ** js


def wronskian_taylor(prob: Problem, r: float = 0.2, N: int = 256, order: int = 4) -> np.ndarray:
    """Taylor coefficients of W at kappa = 0."""
    nodes = _circle(r, N)
    return _laurent_generic(wronskian_array(prob, nodes), nodes, r, 0, order)


def zero_energy_resonance_test(prob: Problem, r: float = 0.2, N: int = 256) -> tuple[bool, complex]:
    """(flag, w0): w0 = W(0) from the Cauchy mean; flag when |w0| < 1e-8 |w1| r."""
    while True:
        # a zero of W other than the origin inside the circle would spoil the mean
        if threshold_zero_order(prob, r, N) <= 1 or r < 1e-4:
            break
        r *= 0.5
    w = wronskian_taylor(prob, r, N, order=1)
    w0, w1 = complex(w[0]), complex(w[1])
    return bool(abs(w0) < 1e-8 * abs(w1) * r), w0
