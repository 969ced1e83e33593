"""Solutions of y'' = (V + kappa^2) y on the uniformizing kappa-plane (p = i kappa^2).

Everything is computed in exponentially scaled variables.  For the solution
that equals exp(kappa x) left of the potential we propagate

    u = exp(-kappa x) y,   w = exp(-kappa x) y'

forward in x.  Constant pieces use an exact transfer matrix, other pieces an
adaptive Runge-Kutta integrator (or a Liouville-Green step when |kappa| is
large).  The solution decaying to the right is obtained from the same routine
applied to the mirrored problem.

The sweep also accumulates L(x) = int_{-inf}^x exp(-kappa (x-s)) u(s) g(s) ds
for a weight g; this is the building block of the resolvent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .problem import PiecewiseFunction, Problem

KAPPA_SWITCH = 40.0
RTOL, ATOL = 1e-12, 1e-14
ODE_METHOD = "DOP853"

_GL_N = 24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_N)


class IntegratorError(RuntimeError):
    """Direct integration failed (too stiff or step underflow)."""


class WronskianCheckError(RuntimeError):
    """W computed at different x disagrees beyond tolerance."""


# ---------------------------------------------------------------------------
# spectral points
# ---------------------------------------------------------------------------

def sheet_of(kappa: complex, tol: float = 1e-14) -> str:
    """Region of the kappa-plane.

    physical: Re kappa > 0 (resolvent side, bound states on its real axis);
    first:    pi/2 < -arg kappa < 3pi/4, Gamow poles (Re p < 0, Im p < 0);
    mirror:   pi/2 < arg kappa < 3pi/4, conjugate partners of first (Re p > 0);
    second:   |arg kappa| > 3pi/4, beyond the wrap-around contour;
    boundary: on one of the seams.
    """
    k = complex(kappa)
    if abs(k.real) <= tol * abs(k):
        return "boundary"
    if k.real > 0:
        return "physical"
    a = np.angle(k)
    if abs(abs(a) - 0.75 * np.pi) <= tol * 10:
        return "boundary"
    if abs(a) > 0.75 * np.pi:
        return "second"
    return "first" if a < 0 else "mirror"


@dataclass(frozen=True)
class SpectralPoint:
    kappa: complex

    @property
    def p(self) -> complex:
        return 1j * self.kappa ** 2

    @property
    def sheet(self) -> str:
        return sheet_of(self.kappa)

    @classmethod
    def from_p(cls, p: complex, physical: bool = True) -> "SpectralPoint":
        """kappa = sqrt(-i p) on the physical side (Re kappa >= 0) or its negative."""
        k = np.sqrt(-1j * complex(p))
        if k.real < 0:
            k = -k
        return cls(k if physical else -k)


def as_kappa(k) -> complex:
    return complex(k.kappa) if isinstance(k, SpectralPoint) else complex(k)


@dataclass(frozen=True)
class SolutionTrace:
    """y(x) = values * exp(exponent), y'(x) = derivs * exp(exponent)."""
    x: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    exponent: np.ndarray
    kappa: SpectralPoint
    side: str

    def y(self) -> np.ndarray:
        return self.values * np.exp(self.exponent)

    def dy(self) -> np.ndarray:
        return self.derivs * np.exp(self.exponent)


# ---------------------------------------------------------------------------
# exact transfer over a constant piece
# ---------------------------------------------------------------------------

def shifted_root(kappa, c: float):
    """q = sqrt(kappa^2 + c) on the branch closest to kappa."""
    kappa = np.asarray(kappa, dtype=complex)
    q = np.sqrt(kappa * kappa + c)
    flip = (q.real * kappa.real + q.imag * kappa.imag) < 0
    return np.where(flip, -q, q)


def _series(z2, coeffs):
    out = np.zeros_like(z2) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * z2 + c
    return out


_SH = [1.0 / np.prod(np.arange(2, 2 * k + 2, dtype=float)) for k in range(8)]      # 1/(2k+1)!
_C2 = [1.0 / np.prod(np.arange(1, 2 * k + 3, dtype=float)) for k in range(9)]      # 1/(2k+2)!


def const_transfer(kappa, c: float, h, with_c2: bool = False):
    """Scaled transfer coefficients over width h for V = c.

    With e = exp(-kappa h):  ch = e cosh(qh),  sh = e sinh(qh)/q,  qsh = e q sinh(qh),
    and optionally c2 = e (cosh(qh) - 1)/q^2.
    """
    kappa = np.asarray(kappa, dtype=complex)
    h = np.asarray(h, dtype=float)
    q = shifted_root(kappa, c)
    qh = q * h
    E1 = np.exp((q - kappa) * h)
    E2 = np.exp(-(q + kappa) * h)
    e = np.exp(-kappa * h)
    ch = 0.5 * (E1 + E2)
    qsh = 0.5 * q * (E1 - E2)
    z2 = qh * qh
    small = np.abs(qh) < 0.1
    with np.errstate(divide="ignore", invalid="ignore"):
        sh = np.where(small, e * h * _series(z2, _SH), 0.5 * (E1 - E2) / np.where(small, 1.0, q))
    if not with_c2:
        return ch, sh, qsh
    small = np.abs(qh) < 0.4
    with np.errstate(divide="ignore", invalid="ignore"):
        c2 = np.where(small, e * h * h * _series(z2, _C2), (ch - e) / np.where(small, 1.0, q * q))
    return ch, sh, qsh, c2


# ---------------------------------------------------------------------------
# the sweep
# ---------------------------------------------------------------------------

def _segment_kind(pw: PiecewiseFunction | None, lo: float, hi: float, inside: tuple[float, float] | None = None):
    """(const value or None, function) of pw on the open segment (lo, hi)."""
    if pw is None:
        return 0.0, None
    mid = 0.5 * (lo + hi)
    a, b = pw.support
    if mid < a or mid > b:
        return 0.0, None
    pc = pw.piece_at(mid)
    if pc is None:
        return 0.0, None
    return pc.const, pc.func


def _gl_panel(lo, hi, n_sub):
    edges = np.linspace(lo, hi, n_sub + 1)
    return edges


def _cumulative_matrix(n: int = _GL_N) -> np.ndarray:
    """Matrix mapping values at GL nodes to int_{-1}^{x_j} f on [-1, 1]."""
    V = np.polynomial.legendre.legvander(_GL_X, n - 1)
    coef_of_vals = np.linalg.solve(V, np.eye(n))
    out = np.zeros((n, n))
    for k in range(n):
        ck = coef_of_vals[:, k]
        ic = np.polynomial.legendre.legint(ck, lbnd=-1)
        out[:, k] = np.polynomial.legendre.legval(_GL_X, ic)
    return out


_CUM = _cumulative_matrix()


def _step_const_const(u, w, L, kappa, c, A, h):
    if A == 0:
        ch, sh, qsh = const_transfer(kappa, c, h)
        e = np.exp(-kappa * h)
        return ch * u + sh * w, qsh * u + ch * w, e * L
    ch, sh, qsh, c2 = const_transfer(kappa, c, h, with_c2=True)
    e = np.exp(-kappa * h)
    Ln = e * L + A * (u * sh + w * c2)
    return ch * u + sh * w, qsh * u + ch * w, Ln


def _n_sub(kappa, h, scale=0.25):
    km = float(np.max(np.abs(kappa))) if np.size(kappa) else 0.0
    return max(1, int(np.ceil(km * h / 4.0)), int(np.ceil(h / scale)))


def _step_const_func(u, w, L, kappa, c, g, lo, hi):
    """Constant V, smooth weight g: exact transfer to Gauss nodes, quadrature for L."""
    edges = _gl_panel(lo, hi, _n_sub(kappa, hi - lo))
    k = kappa[:, None]
    for a, b in zip(edges[:-1], edges[1:]):
        hh = 0.5 * (b - a)
        s = a + hh * (_GL_X + 1)
        gv = g(s, 0)
        ch, sh, _ = const_transfer(k, c, (s - a)[None, :])
        us = ch * u[:, None] + sh * w[:, None]
        # exp(-kappa (b - s)) * us
        Lp = (np.exp(-k * (b - s)[None, :]) * us * (gv * _GL_W * hh)[None, :]).sum(axis=1)
        u, w, L = _step_const_const(u, w, L, kappa, c, 0.0, b - a)
        L = L + Lp
    return u, w, L


def _step_ode(u, w, L, kappa, V, g, A, lo, hi):
    n = kappa.size
    k2 = kappa * kappa

    def rhs(x, y):
        uu, ww, LL = y[:n], y[n:2 * n], y[2 * n:]
        vx = float(np.real(V(np.array([x]), 0)[0]))
        gx = A if g is None else complex(g(np.array([x]), 0)[0])
        return np.concatenate([ww - kappa * uu, (vx + k2) * uu - kappa * ww, gx * uu - kappa * LL])

    y0 = np.concatenate([u, w, L]).astype(complex)
    sol = solve_ivp(rhs, (lo, hi), y0, method=ODE_METHOD, rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise IntegratorError(sol.message)
    y = sol.y[:, -1]
    return y[:n], y[n:2 * n], y[2 * n:]


def _step_wkb(u, w, L, kappa, V, g, A, lo, hi):
    """Liouville-Green transfer: modes sqrt(Q_a/Q) exp(+-int Q), Q = sqrt(kappa^2 + V)."""
    edges = _gl_panel(lo, hi, _n_sub(kappa, hi - lo))
    k = kappa[:, None]
    for a, b in zip(edges[:-1], edges[1:]):
        hh = 0.5 * (b - a)
        s = a + hh * (_GL_X + 1)
        pts = np.concatenate([[a], s, [b]])
        v = np.real(V(pts, 0))
        dv = np.real(V(pts, 1))
        Q = np.sqrt(k * k + v[None, :])
        flip = (Q.real * k.real + Q.imag * k.imag) < 0
        Q = np.where(flip, -Q, Q)
        eta = dv[None, :] / (4 * Q * Q)
        f = v[None, 1:-1] / (Q[:, 1:-1] + k)                 # Q - kappa
        phi_nodes = hh * f @ _CUM.T                           # int_a^{s_j} (Q - kappa)
        phi_end = hh * f @ _GL_W
        phi = np.concatenate([np.zeros((kappa.size, 1)), phi_nodes, phi_end[:, None]], axis=1)
        Qa, ea = Q[:, 0], eta[:, 0]
        alpha = (w + (Qa + ea) * u) / (2 * Qa)
        beta = u - alpha
        amp = np.sqrt(Qa[:, None] / Q)
        tau = (pts - a)[None, :]
        Mp = amp * np.exp(phi)
        Mm = amp * np.exp(-2 * k * tau - phi)
        us = alpha[:, None] * Mp + beta[:, None] * Mm
        ws = (Q - eta) * alpha[:, None] * Mp + (-Q - eta) * beta[:, None] * Mm
        gv = np.full(s.shape, A, dtype=complex) if g is None else g(s, 0)
        Lp = (np.exp(-k * (b - s)[None, :]) * us[:, 1:-1] * (gv * _GL_W * hh)[None, :]).sum(axis=1)
        L = np.exp(-kappa * (b - a)) * L + Lp
        u, w = us[:, -1], ws[:, -1]
    return u, w, L


def sweep(vpw: PiecewiseFunction, gpw: PiecewiseFunction | None, kappa, xs, x0: float = None,
          u0=None, w0=None, kappa_switch: float = KAPPA_SWITCH):
    """Propagate (u, w, L) forward from x0 and report them at the sorted points xs.

    Default initial data u = 1, w = kappa at x0 <= -1 is the scaled form of
    exp(kappa x).  Returns three arrays of shape (len(kappa), len(xs)).
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(np.diff(xs) < 0):
        raise ValueError("xs must be sorted")
    lo_v, hi_v = vpw.support
    if x0 is None:
        # left of every support the scaled state is exact; propagating through
        # free space there only amplifies rounding in the growing mode
        x0 = min(lo_v, gpw.support[0] if gpw is not None else lo_v)
    nk = kappa.size
    u = np.ones(nk, dtype=complex) if u0 is None else np.broadcast_to(np.asarray(u0, dtype=complex), (nk,)).copy()
    w = kappa.copy() if w0 is None else np.broadcast_to(np.asarray(w0, dtype=complex), (nk,)).copy()
    L = np.zeros(nk, dtype=complex)
    brk = list(vpw.breaks)
    if gpw is not None:
        brk += list(gpw.breaks)
    xmax = xs[-1]
    events = np.unique(np.concatenate([[x0], xs[xs > x0], [b for b in brk if x0 < b < xmax]]))
    out_u = np.empty((nk, xs.size), dtype=complex)
    out_w = np.empty_like(out_u)
    out_L = np.empty_like(out_u)
    big = np.abs(kappa) > kappa_switch
    j = 0
    while j < xs.size and xs[j] <= events[0]:
        out_u[:, j], out_w[:, j], out_L[:, j] = u, w, L
        j += 1
    for lo, hi in zip(events[:-1], events[1:]):
        c, V = _segment_kind(vpw, lo, hi)
        A, g = _segment_kind(gpw, lo, hi)
        if c is not None:
            if A is not None:
                u, w, L = _step_const_const(u, w, L, kappa, c, A, hi - lo)
            else:
                u, w, L = _step_const_func(u, w, L, kappa, c, g, lo, hi)
        else:
            if np.any(~big):
                m = ~big
                u[m], w[m], L[m] = _step_ode(u[m], w[m], L[m], kappa[m], V, g, A, lo, hi)
            if np.any(big):
                m = big
                u[m], w[m], L[m] = _step_wkb(u[m], w[m], L[m], kappa[m], V, g, A, lo, hi)
        while j < xs.size and xs[j] <= hi:
            out_u[:, j], out_w[:, j], out_L[:, j] = u, w, L
            j += 1
    return out_u, out_w, out_L


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _default_grid(lo: float, hi: float, prob: Problem, n: int = 201) -> np.ndarray:
    g = np.linspace(lo, hi, n)
    extra = [b for b in prob.potential.pw.breaks if lo < b < hi]
    return np.unique(np.concatenate([g, extra]))


def _require_nonzero(k: complex):
    if k == 0:
        raise ValueError("kappa = 0 is handled by limits in callers")


def fundamental_pair(prob: Problem, kappa, x=None, check: bool = True):
    """f1, f2 on [-1, 1] with f1(-1) = 1, f1'(-1) = 0, f2(-1) = 0, f2'(-1) = 1."""
    k = as_kappa(kappa)
    xs = _default_grid(-1.0, 1.0, prob) if x is None else np.sort(np.asarray(x, dtype=float))
    vpw = prob.potential.pw
    ka = np.array([k, k])
    u, w, _ = sweep(vpw, None, ka, xs, x0=-1.0, u0=np.array([1.0, 0.0]), w0=np.array([0.0, 1.0]))
    expo = k * (xs + 1.0)
    sp = SpectralPoint(k)
    f1 = SolutionTrace(xs, u[0], w[0], expo, sp, "f1")
    f2 = SolutionTrace(xs, u[1], w[1], expo, sp, "f2")
    if check:
        cw = (u[0] * w[1] - u[1] * w[0]) * np.exp(2 * expo)
        err = np.max(np.abs(cw - 1.0))
        if not err < 1e-8:
            raise IntegratorError(f"cross-Wronskian of f1, f2 deviates from 1 by {err:.3g}")
    return f1, f2


def scaled_jost(prob: Problem, kappa, xs):
    """Scaled Jost data at sorted xs for an array of kappa.

    Returns (u_minus, w_minus, u_plus, v_plus) with
    y- = exp(kappa x) u_minus, y-' = exp(kappa x) w_minus,
    y+ = exp(-kappa x) u_plus, y+' = exp(-kappa x) v_plus.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    xs = np.asarray(xs, dtype=float)
    vpw = prob.potential.pw
    um, wm, _ = sweep(vpw, None, kappa, xs)
    xr = -xs[::-1]
    ur, wr, _ = sweep(vpw.reflected(), None, kappa, xr)
    return um, wm, ur[:, ::-1], -wr[:, ::-1]


def jost_solutions(prob: Problem, kappa, x=None):
    """(y+, y-) on [-X, X] as scaled traces."""
    k = as_kappa(kappa)
    _require_nonzero(k)
    X = prob.X
    xs = _default_grid(-X, X, prob) if x is None else np.sort(np.asarray(x, dtype=float))
    um, wm, up, vp = scaled_jost(prob, [k], xs)
    sp = SpectralPoint(k)
    yp = SolutionTrace(xs, up[0], vp[0], -k * xs, sp, "plus")
    ym = SolutionTrace(xs, um[0], wm[0], k * xs, sp, "minus")
    return yp, ym


def wronskian_array(prob: Problem, kappa) -> np.ndarray:
    """W(kappa) = y+ y-' - y- y+' for an array of kappa (scaled form at x = 1)."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=complex))
    u, w, _ = sweep(prob.potential.pw, None, kappa, np.array([1.0]))
    return w[:, 0] + kappa * u[:, 0]


def wronskian_at(prob: Problem, kappa, xs) -> np.ndarray:
    """W evaluated through the Jost pair at each x in xs (should not depend on x)."""
    um, wm, up, vp = scaled_jost(prob, kappa, np.sort(np.asarray(xs, dtype=float)))
    return up * wm - um * vp


def wronskian(prob: Problem, kappa, check: bool = True, rtol: float = 1e-9) -> complex:
    k = as_kappa(kappa)
    _require_nonzero(k)
    W = complex(wronskian_array(prob, [k])[0])
    if check:
        Wx = wronskian_at(prob, [k], [-0.6, 0.15, 0.8])[0]
        scale = max(abs(W), np.max(np.abs(Wx)), 1e-300)
        # near a zero the relative test is meaningless; compare with the size of the terms
        um, wm, up, vp = scaled_jost(prob, [k], [0.15])
        terms = max(abs(up[0, 0] * wm[0, 0]), abs(um[0, 0] * vp[0, 0]), scale)
        dev = np.max(np.abs(Wx - W))
        if dev > rtol * terms:
            raise WronskianCheckError(f"W varies with x: deviation {dev:.3g} vs scale {terms:.3g}")
    return W


def potential_integral(prob: Problem, a: float, b: float) -> float:
    """int_a^b V dx by Gauss-Legendre on each piece."""
    if b < a:
        return -potential_integral(prob, b, a)
    total = 0.0
    for pc in prob.potential.pw.pieces:
        lo, hi = max(a, pc.a), min(b, pc.b)
        if hi <= lo:
            continue
        s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_X
        total += 0.5 * (hi - lo) * float(np.real(pc.func(s, 0)) @ _GL_W)
    return total


def wkb_jost(prob: Problem, kappa, x: float, side: str = "plus", kappa_switch: float = KAPPA_SWITCH) -> complex:
    """Two-term high-energy form of the Jost solutions.

    y+ ~ exp(-kappa x) (1 + int_x^1 V / (2 kappa)),  y- ~ exp(kappa x) (1 + int_{-1}^x V / (2 kappa)).
    """
    k = as_kappa(kappa)
    if abs(k) < kappa_switch:
        raise ValueError(f"|kappa| = {abs(k):.3g} below the WKB threshold {kappa_switch}")
    x = float(x)
    if side == "plus":
        I = potential_integral(prob, max(min(x, 1.0), -1.0), 1.0)
        return np.exp(-k * x) * (1 + I / (2 * k))
    if side == "minus":
        I = potential_integral(prob, -1.0, max(min(x, 1.0), -1.0))
        return np.exp(k * x) * (1 + I / (2 * k))
    raise ValueError("side must be 'plus' or 'minus'")
