"""Independent references for psi(x, t): Bromwich inversion, branch-cut integral,
the exact free evolution and a Crank-Nicolson time stepper.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special
from scipy.linalg import solve_banded

from .problem import Problem, eval_initial, eval_potential
from .resolvent import resolvent

OMEGA = np.exp(0.25j * np.pi)


class OracleError(RuntimeError):
    pass


class BoundaryReached(OracleError):
    pass


class PoleNearCut(OracleError):
    def __init__(self, msg, pole=None):
        super().__init__(msg)
        self.pole = pole


@dataclass(frozen=True)
class ContourSpec:
    kind: str = "vertical-bromwich"     # or "deformed-wraparound"
    abscissa: float | None = None       # a0; default 1/t
    nodes: int = 20                     # Gauss-Legendre nodes per panel (>= 16)
    height: float = 1e8                 # largest |Im p| considered
    tol: float = 1e-12                  # discarded-tail target (absolute, relative to max |psi_hat|)
    width: float = 0.5                  # panel width factor

    def __post_init__(self):
        if self.kind not in ("vertical-bromwich", "deformed-wraparound"):
            raise ValueError(f"unknown contour kind {self.kind!r}")
        if self.nodes < 16:
            raise ValueError("at least 16 nodes per panel")


@dataclass(frozen=True)
class BromwichResult:
    value: complex
    nodes: int
    height: float
    tail: float


# ---------------------------------------------------------------------------
# free evolution
# ---------------------------------------------------------------------------

def free_evolution(prob: Problem, x, t: float) -> np.ndarray:
    """Exact V = 0 evolution of psi_0: closed form for piecewise-constant data, quadrature otherwise."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t <= 0:
        raise ValueError("t must be positive")
    root = np.sqrt(4j * t)
    pw = prob.initial.pw
    out = np.zeros(x.shape, dtype=complex)
    if pw.piecewise_constant:
        for pc in pw.pieces:
            out += 0.5 * pc.const * (special.erf((x - pc.a) / root) - special.erf((x - pc.b) / root))
        return out
    norm = 1 / np.sqrt(4j * np.pi * t)
    for i, xi in enumerate(x):
        for pc in pw.pieces:
            f = lambda s: pc.func(s, 0) * np.exp(1j * (xi - s) ** 2 / (4 * t))
            re = integrate.quad(lambda s: f(s).real, pc.a, pc.b, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
            im = integrate.quad(lambda s: f(s).imag, pc.a, pc.b, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
            out[i] += norm * complex(re, im)
    return out


# ---------------------------------------------------------------------------
# Bromwich inversion with Filon-Legendre panels
# ---------------------------------------------------------------------------

def _filon_weights(n: int, omega: np.ndarray) -> np.ndarray:
    """W[k, m] = int_-1^1 l_m(tau) exp(i omega_k tau) dtau for the n-point Gauss-Legendre Lagrange basis."""
    xg, wg = np.polynomial.legendre.leggauss(n)
    P = np.array([special.eval_legendre(j, xg) for j in range(n)])          # (n, n)
    # Legendre coefficients of values f: c_j = (2j+1)/2 sum_m w_m P_j(x_m) f_m
    C = (2 * np.arange(n) + 1)[:, None] / 2 * P * wg[None, :]
    moments = np.array([2 * (1j ** j) * special.spherical_jn(j, omega) for j in range(n)]).T   # (k, n)
    return moments @ C


def _panels(y0: float, y1: float, scale_fn):
    edges = [y0]
    y = y0
    step = np.sign(y1 - y0)
    while (y1 - y) * step > 0:
        h = scale_fn(abs(y))
        y = y + step * h
        if (y1 - y) * step < 0:
            y = y1
        edges.append(y)
    return np.array(edges)


def bromwich_invert(prob: Problem, x: float, t: float, spec: ContourSpec | None = None,
                    return_info: bool = False):
    """(1/2 pi i) int psi_hat(x, p) exp(p t) dp on Re p = a0, with the psi_0(x)/p part done exactly."""
    if t <= 0:
        raise ValueError("t must be positive")
    spec = spec or ContourSpec()
    if spec.kind != "vertical-bromwich":
        raise ValueError("bromwich_invert uses the vertical contour")
    x, t = float(x), float(t)
    a0 = 1.0 / t if spec.abscissa is None else float(spec.abscissa)
    psi0x = complex(eval_initial(prob, [x])[0])
    n = spec.nodes
    xg, _ = np.polynomial.legendre.leggauss(n)
    d = abs(x) + prob.X + 1.0

    # bound states put poles at p = i kappa_b^2, a distance a0 from the contour
    from .spectrum import bound_states
    ybound = [b.kappa ** 2 for b in bound_states(prob)]

    def width(ay, sign):
        # resolve the branch point at distance a0 and the exp(-kappa d) phase for large |y|
        h = spec.width * min(a0 + ay, 8.0 * np.sqrt(a0 + ay) / d)
        if sign > 0:
            for yb in ybound:
                h = min(h, spec.width * max(a0, abs(ay - yb)))
        return h

    total = 0j
    count = 0
    fmax = 0.0
    tails = []
    for sign in (1.0, -1.0):
        y_lo = 0.0
        block = 1.0
        quiet = 0
        while True:
            y_hi = min(y_lo + block, spec.height)
            edges = _panels(y_lo, y_hi, lambda ay: width(ay, sign))
            a, b = edges[:-1], edges[1:]
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            ys = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
            p = a0 + 1j * sign * ys
            kap = np.sqrt(-1j * p)
            kap = np.where(kap.real < 0, -kap, kap)
            F = resolvent(prob, kap, [x])[:, 0] - psi0x / p
            count += ys.size
            g = F.reshape(mid.size, n)
            fmax = max(fmax, float(np.max(np.abs(g))))
            Wf = _filon_weights(n, sign * t * half)
            pan = np.einsum("km,km->k", Wf, g) * half * np.exp(1j * sign * mid * t)
            total += pan.sum()
            y_lo = y_hi
            last = np.abs(g[-1]).max()
            # integration by parts for the remainder: int_Y^inf f e^{i s y t} dy ~ -f(Y) e^{isYt}/(i s t)
            tail = last / t
            if tail < spec.tol * max(fmax, 1e-300) or y_lo >= spec.height:
                if y_lo < spec.height:
                    quiet += 1
                if quiet >= 1 or y_lo >= spec.height:
                    fY = F[-1]
                    corr = -fY * np.exp(1j * sign * y_lo * t) / (1j * sign * t)
                    total += corr
                    # what the correction leaves behind is the next term, f'(Y) / t^2
                    dF = abs(F[-1] - F[-2]) / abs(ys[-1] - ys[-2])
                    tails.append(dF / (t * t))
                    break
            block *= 2.0
    # dp = i dy on both halves; (1/2 pi i) * i = 1/(2 pi)
    value = psi0x + np.exp(a0 * t) / (2 * np.pi) * total
    tail = max(tails) * np.exp(a0 * t) / (2 * np.pi)
    if tail > 1e-6 * max(abs(value), 1e-12):
        raise OracleError(f"Bromwich tail {tail:.3g} not below tolerance at height {spec.height:g}")
    if return_info:
        return BromwichResult(complex(value), count, y_lo, float(tail))
    return complex(value)


# ---------------------------------------------------------------------------
# branch-cut integral
# ---------------------------------------------------------------------------

def branch_cut_integral(prob: Problem, x: float, t: float, poles=None, n: int = 24, return_error: bool = False,
                        min_distance: float = 1e-3):
    """(1/2 pi i) int_0^inf [F(-sqrt(s) w) - F(sqrt(s) w)] exp(-s t) ds, s = sigma^2, Gauss-Legendre panels.

    poles: optional iterable of kappa values; any p = i kappa^2 within min_distance of
    the negative real axis makes the integrand unstable and raises PoleNearCut.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x, t = float(x), float(t)
    if poles is not None:
        for k in poles:
            p = 1j * complex(k) ** 2
            dist = abs(p.imag) if p.real < 0 else abs(p)
            if dist < min_distance:
                raise PoleNearCut(f"pole at p = {p:.6g} lies {dist:.2g} from the cut", pole=complex(k))
    d = abs(x) + prob.X + 1.0
    # exp(-sigma^2 t + sigma d / sqrt 2) below 1e-18 of its peak
    smax = (d / np.sqrt(2) + np.sqrt(d * d / 2 + 4 * 42 * t)) / (2 * t)

    def integrate_on(npan):
        edges = np.linspace(0.0, smax, npan + 1)
        xg, wg = np.polynomial.legendre.leggauss(n)
        mid, half = 0.5 * (edges[:-1] + edges[1:]), 0.5 * np.diff(edges)
        sg = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
        ww = (half[:, None] * wg[None, :]).ravel()
        k = np.concatenate([-sg * OMEGA, sg * OMEGA])
        F = resolvent(prob, k, [x])[:, 0]
        jump = F[:sg.size] - F[sg.size:]
        return complex(np.sum(jump * sg * np.exp(-sg * sg * t) * ww) / (1j * np.pi))

    npan = max(8, int(np.ceil(smax * d / 4)))
    v1 = integrate_on(npan)
    v2 = integrate_on(2 * npan)
    err = abs(v2 - v1)
    if return_error:
        return v2, float(err)
    return v2


# ---------------------------------------------------------------------------
# Crank-Nicolson
# ---------------------------------------------------------------------------

def dtbc_kernel(R: float, nsteps: int) -> np.ndarray:
    """Coefficients l_m of the discrete transparent boundary condition psi_{J+1} = sum_m l_m psi_J^{n-m}.

    With w = 1/z, (1 + w) l(w) = (1 + w) - i R (1 - w) - sqrt(N(w)),
    N(w) = -i R (1 - w) [2 (1 + w) - i R (1 - w)], R = dx^2 / dt; sqrt(N) follows the
    recurrence from 2 N S' = N' S.
    """
    # N = a + b w + c w^2
    # -iR [2 - 2 w^2 - iR (1 - 2w + w^2)]
    a = -1j * R * (2 - 1j * R)
    b = -1j * R * (2j * R)
    c = -1j * R * (-2 - 1j * R)
    m = nsteps + 2
    s = np.zeros(m, dtype=complex)
    s[0] = np.sqrt(a)
    if abs(1 - 1j * R - s[0]) > 1:
        s[0] = -s[0]
    if m > 1:
        s[1] = b * s[0] / (2 * a)
    for k in range(1, m - 1):
        s[k + 1] = (b * (1 - 2 * k) * s[k] + 2 * c * (2 - k) * s[k - 1]) / (2 * a * (k + 1))
    q = -s
    q[0] += 1 - 1j * R
    q[1] += 1 + 1j * R
    ell = np.empty(m, dtype=complex)
    ell[0] = q[0]
    for k in range(1, m):
        ell[k] = q[k] - ell[k - 1]
    return ell[:nsteps + 1]


@dataclass
class CNResult:
    x: np.ndarray
    t: float
    psi: np.ndarray
    norm_drift: float
    steps: int
    boundary: str


def _node_potential(prob: Problem, xs: np.ndarray) -> np.ndarray:
    """V at the grid nodes, with the mean of the one-sided values at jump points."""
    V = np.real(eval_potential(prob, xs))
    dx = xs[1] - xs[0]
    for b in prob.potential.pw.breaks:
        j = np.nonzero(np.abs(xs - b) < 1e-9 * dx)[0]
        if j.size:
            eps = 1e-12 * max(1.0, abs(b))
            V[j] = 0.5 * np.real(eval_potential(prob, [b - eps]) + eval_potential(prob, [b + eps]))[0]
    return V


def _cn_run(prob, xs, dx, t_final, nsteps, boundary, subtract_free):
    dt = t_final / nsteps
    N = xs.size
    V = _node_potential(prob, xs)
    psi = np.zeros(N, dtype=complex) if subtract_free else eval_initial(prob, xs).astype(complex)
    r = 1j * dt / (2 * dx * dx)
    # (1 + i dt/2 H) psi^{n+1} = (1 - i dt/2 H) psi^n - i dt/2 (f^{n+1} + f^n)
    diag = 1 + 2 * r + 0.5j * dt * V
    ab = np.zeros((3, N), dtype=complex)
    ab[0, 1:] = -r
    ab[1] = diag
    ab[2, :-1] = -r
    ell = None
    histL = histR = None
    if boundary == "transparent":
        ell = dtbc_kernel(dx * dx / dt, nsteps)
        ab[1, 0] -= r * ell[0]
        ab[1, -1] -= r * ell[0]
        histL = np.zeros(nsteps + 1, dtype=complex)
        histR = np.zeros(nsteps + 1, dtype=complex)
        histL[0], histR[0] = psi[0], psi[-1]
        ghostL = ghostR = 0j
    inside = np.nonzero(V != 0)[0]
    f_old = np.zeros(N, dtype=complex)
    if subtract_free and inside.size:
        f_old[inside] = V[inside] * eval_initial(prob, xs[inside])
    norm0 = np.sqrt(np.sum(np.abs(psi) ** 2) * dx)
    for n in range(1, nsteps + 1):
        lap = np.empty(N, dtype=complex)
        lap[1:-1] = psi[2:] - 2 * psi[1:-1] + psi[:-2]
        if boundary == "transparent":
            lap[0] = psi[1] - 2 * psi[0] + ghostL
            lap[-1] = ghostR - 2 * psi[-1] + psi[-2]
        else:
            lap[0] = psi[1] - 2 * psi[0]
            lap[-1] = -2 * psi[-1] + psi[-2]
        rhs = psi + r * lap - 0.5j * dt * V * psi
        f_new = np.zeros(N, dtype=complex)
        if subtract_free and inside.size:
            f_new[inside] = V[inside] * free_evolution(prob, xs[inside], n * dt)
            rhs -= 0.5j * dt * (f_new + f_old)
        if boundary == "transparent":
            # psi_{J+1}^{n} = l_0 psi_J^n + sum_{m>=1} l_m psi_J^{n-m}
            hl = np.dot(ell[1:n + 1], histL[n - 1::-1])
            hr = np.dot(ell[1:n + 1], histR[n - 1::-1])
            rhs[0] += r * hl
            rhs[-1] += r * hr
        psi = solve_banded((1, 1), ab, rhs)
        if boundary == "transparent":
            histL[n], histR[n] = psi[0], psi[-1]
            ghostL = ell[0] * psi[0] + hl
            ghostR = ell[0] * psi[-1] + hr
        f_old = f_new
    drift = abs(np.sqrt(np.sum(np.abs(psi) ** 2) * dx) - norm0) / max(norm0, 1e-300) if not subtract_free else np.nan
    return psi, drift


def cn_propagate(prob: Problem, t_final: float, dx: float = 2e-3, dt: float | None = None, L: float | None = None,
                 boundary: str = "transparent", subtract_free: bool = True, richardson: bool = True,
                 x=None, check_walls: bool = True) -> CNResult:
    """Crank-Nicolson for i psi_t = -psi_xx + V psi on a uniform grid of [-L, L].

    boundary = "transparent" closes the grid with the exact discrete transparent
    condition; "dirichlet" uses walls and checks that nothing reaches them.  With
    subtract_free the exact free evolution is removed and only the remainder, driven by
    V psi_free, is stepped.  Richardson extrapolation in dt removes the O(dt^2) error.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    if boundary not in ("transparent", "dirichlet"):
        raise ValueError("boundary must be 'transparent' or 'dirichlet'")
    if L is None:
        L = prob.X + 1.0 if boundary == "transparent" else prob.X + 1 + 4 * np.sqrt(t_final) + 4.0
        if x is not None:
            L = max(L, float(np.max(np.abs(x))) + 0.5)
    n = int(round(2 * L / dx))
    xs = np.linspace(-L, L, n + 1)
    dx = xs[1] - xs[0]
    dt = dx if dt is None else dt
    nsteps = max(1, int(np.ceil(t_final / dt)))
    psi, drift = _cn_run(prob, xs, dx, t_final, nsteps, boundary, subtract_free)
    if richardson:
        psi2, drift2 = _cn_run(prob, xs, dx, t_final, 2 * nsteps, boundary, subtract_free)
        psi = (4 * psi2 - psi) / 3
        drift = max(drift, drift2) if np.isfinite(drift) else drift
    if subtract_free:
        psi = psi + free_evolution(prob, xs, t_final)
    if boundary == "dirichlet" and check_walls:
        edge = np.abs(xs) > 0.95 * L
        if np.sum(np.abs(psi[edge]) ** 2) * dx > 1e-10:
            raise BoundaryReached("wave reached the walls; enlarge L")
    if x is not None:
        xq = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.interp(xq, xs, psi.real) + 1j * np.interp(xq, xs, psi.imag)
        return CNResult(xq, float(t_final), vals, drift, nsteps, boundary)
    return CNResult(xs, float(t_final), psi, drift, nsteps, boundary)
