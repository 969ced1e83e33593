"""Decomposition of psi(x, t) into bound states, Gamow modes and a dispersive part.

    psi(x, t) = sum_b b_k psi_k(x) exp(-i E_k t) + sum_k g_k Gamma_k(x) exp(p_k t) + D(x, t),

    D(x, t) = (1/2 pi i) int_0^inf [F(-sqrt(s) w) - F(sqrt(s) w)] exp(-s t) ds,

with F(kappa) = psi_hat(x, i kappa^2) and w = exp(i pi/4).  Expanding F at kappa = 0
and integrating term by term gives D ~ sum_j (i/pi) a_j w^j Gamma(j/2+1) t^-(j/2+1)
over odd j.  Subtracting the poles of F inside a disk first leaves a series with a
larger radius plus one closed-form pole term per subtracted pole.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .problem import Problem
from .resolvent import TaylorError, _circle, _laurent_generic, kappa_taylor, resolvent, threshold_zero_order, \
    winding_number
from .shooting import SolutionTrace, scaled_jost, sweep, wronskian_array
from .specfun import pole_term_E
from .spectrum import BoundState, Resonance, ResonanceSearch, dW_dkappa, eigenfunction_values, search_spectrum

OMEGA = np.exp(0.25j * np.pi)
J_MAX = 161


class ExpansionError(RuntimeError):
    pass


class GamowTailError(ExpansionError):
    pass


class SeriesTooShort(ExpansionError):
    def __init__(self, msg, required_J=None):
        super().__init__(msg)
        self.required_J = required_J


# ---------------------------------------------------------------------------
# residues at zeros of W
# ---------------------------------------------------------------------------

def _overlap_plus(prob: Problem, kappa: complex) -> complex:
    """int y+(s) psi_0(s) ds, from the exact kernel integral of the mirrored sweep."""
    X = prob.X
    _, _, Lr = sweep(prob.potential.pw.reflected(), prob.initial.pw.reflected(), np.array([kappa]), [X], x0=-X)
    return complex(np.exp(kappa * X) * Lr[0, 0])


def _dependence(prob: Problem, kappa: complex) -> complex:
    """c with y- = c y+ at a zero of W, read at x = 1 where y+ = exp(-kappa)."""
    um, _, _, _ = scaled_jost(prob, [kappa], [1.0])
    return complex(np.exp(2 * kappa) * um[0, 0])


def jost_plus(prob: Problem, kappa: complex, x) -> np.ndarray:
    """y+(x; kappa) at arbitrary x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(x)
    _, _, up, _ = scaled_jost(prob, [kappa], x[order])
    out = np.empty(x.shape, dtype=complex)
    out[order] = up[0] * np.exp(-kappa * x[order])
    return out


def zero_strength(prob: Problem, kappa: complex, dW: complex | None = None) -> complex:
    """s with Res_kappa psi_hat(x, .) = s y+(x) at a simple zero kappa of W."""
    dW = dW_dkappa(prob, kappa) if dW is None else dW
    return -1j * _dependence(prob, kappa) * _overlap_plus(prob, kappa) / dW


def residue_contour(prob: Problem, kappa: complex, x, radius: float | None = None, n: int = 64) -> np.ndarray:
    """(1/2 pi i) closed integral of psi_hat(x, p) dp around p = i kappa^2, taken in kappa."""
    radius = 1e-2 * max(1.0, abs(kappa)) ** 0.5 if radius is None else radius
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    z = kappa + radius * np.exp(1j * th)
    F = resolvent(prob, z, x)
    dz = 1j * radius * np.exp(1j * th)
    return (F * (2j * z * dz)[:, None]).sum(axis=0) * (2 * np.pi / n) / (2j * np.pi)


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GamowMode:
    resonance: Resonance
    gamma: complex
    Gamma: SolutionTrace          # y+ itself: Gamma(1) = exp(-kappa)
    g: complex

    @property
    def kappa(self) -> complex:
        return self.resonance.kval

    @property
    def p(self) -> complex:
        return self.resonance.p

    def shape(self, prob: Problem, x) -> np.ndarray:
        return jost_plus(prob, self.kappa, x)

    def term(self, prob: Problem, x, t: float) -> np.ndarray:
        return self.g * self.shape(prob, x) * np.exp(self.p * t)


def gamow_mode(prob: Problem, res: Resonance, xgrid=None) -> GamowMode:
    if res.sheet != "first":
        raise ExpansionError(f"resonance on the {res.sheet} sheet is not a Gamow mode")
    k = res.kval
    xs = np.linspace(-prob.X, prob.X, 201) if xgrid is None else np.sort(np.asarray(xgrid, float))
    _, _, up, vp = scaled_jost(prob, [k], xs)
    if abs(up[0, np.argmin(np.abs(xs - 1))]) < 1e-300:
        raise ExpansionError("normalization point carries a vanishing Gamow vector")
    trace = SolutionTrace(xs, up[0], vp[0], -k * xs, res.kappa, "plus")
    # Res_p psi_hat = 2 i kappa Res_kappa psi_hat = g y+(x)
    g = 2j * k * zero_strength(prob, k, res.dW)
    return GamowMode(res, -res.p, trace, complex(g))


def bound_coefficient(prob: Problem, bs: BoundState) -> complex:
    """<psi_k, psi_0> with the normalized (real) eigenfunction."""
    return _overlap_plus(prob, bs.kappa) / bs.norm


# ---------------------------------------------------------------------------
# dispersive series
# ---------------------------------------------------------------------------

def watson_coefficient(a_j: complex, j: int) -> complex:
    """Coefficient of t^-(j/2+1) contributed by the Laurent coefficient a_j (odd j)."""
    return 1j / np.pi * a_j * OMEGA ** j * np.exp(gammaln(j / 2 + 1))


@dataclass(frozen=True)
class DispersiveSeries:
    """sum_n coefficients[n] * t^-powers[n]."""
    x: float
    powers: np.ndarray
    coefficients: np.ndarray
    rho: float                    # |p| of the nearest singularity left in the series
    J: int
    leading: float                # 0.5 with a zero-energy resonance, else 1.5
    subtracted: tuple = ()        # (kappa_j, Res_kappa F) pairs removed before expanding
    doubling_error: float = 0.0
    r: float = 1.0                # radius of the Cauchy circle
    scale: float = 1.0            # max |F| on that circle

    def terms(self, t: float) -> np.ndarray:
        return self.coefficients * float(t) ** (-self.powers)

    def noise(self, t: float) -> np.ndarray:
        """Per-term error carried over from the Cauchy coefficients (aliasing or rounding)."""
        j = 2 * (self.powers - 1)
        rel = max(self.doubling_error, 2.2e-16)
        return np.exp(gammaln(j / 2 + 1)) / np.pi * rel * self.scale / self.r ** j * float(t) ** (-self.powers)


def _poles_inside(search: ResonanceSearch, M: float) -> list[complex]:
    ks = [r.kval for r in search.resonances] + [complex(b.kappa) for b in search.bound]
    return sorted([k for k in ks if abs(k) ** 2 <= M], key=abs)


def _next_radius(prob: Problem, search: ResonanceSearch, inside: list[complex]) -> float:
    ks = [abs(r.kval) for r in search.resonances] + [b.kappa for b in search.bound]
    inner = max([abs(k) for k in inside], default=0.0)
    outer = [k for k in ks if k > inner + 1e-9]
    return min(outer) if outer else search.radius


def dispersive_series(prob: Problem, x: float, J: int | None = None, M: float = 0.0,
                      search: ResonanceSearch | None = None, t_hint: float | None = None,
                      tol: float = 1e-9) -> DispersiveSeries:
    """Watson series of the branch-cut term at x; with M > 0 the poles |p| <= M are removed first."""
    if M > 0 and search is None:
        search = search_spectrum(prob, M=max(2 * M, 30.0))
    base = threshold_zero_order(prob, 1e-3)
    if M <= 0:
        from .resolvent import zero_free_radius
        R = zero_free_radius(prob)
        inside: list[complex] = []
    else:
        inside = _poles_inside(search, M)
        R = _next_radius(prob, search, inside)
    if J is None:
        J = J_MAX if t_hint is None else int(min(J_MAX, max(41, np.ceil(2 * R * R * t_hint) + 12)))
    J = int(J) | 1
    if J > J_MAX:
        raise TaylorError(f"J = {J} exceeds {J_MAX}")
    inner = max([abs(k) for k in inside], default=0.0)
    r = 0.8 * R if inner < 0.7 * R else 0.5 * (inner + R)
    # |F| grows like exp(r d) on the circle; keep the rounding loss bounded
    d = abs(x) + prob.X
    r = max(min(r, 12.0 / d), 1.1 * inner) if inner > 0 else min(r, 12.0 / d)
    if M <= 0:
        tay = kappa_taylor(prob, x, r=r, J=J, check=False, jmax_allowed=J_MAX)
        a = np.concatenate([[tay.pole_part[0], tay.pole_part[1]], tay.coefficients])
        err = tay.doubling_error
        fmax = tay.scale
        poles = ()
    else:
        N = max(256, 8 * J)
        nodes = _circle(r, 2 * N)
        if winding_number(wronskian_array(prob, nodes)) != base + len(inside):
            raise TaylorError(f"pole count inside |kappa| < {r:g} does not match the subtracted set")
        F = resolvent(prob, nodes, [x])[:, 0]
        poles = tuple((k, complex(zero_strength(prob, k) * jost_plus(prob, k, [x])[0])) for k in inside)
        for k, Rk in poles:
            F = F - Rk / (nodes - k)
        a2 = _laurent_generic(F, nodes, r, -2, J)
        a1 = _laurent_generic(F[::2], nodes[::2], r, -2, J)
        js = np.arange(-2, J + 1)
        fmax = float(np.max(np.abs(F)))
        err = float(np.max(np.abs(a2 - a1) * r ** js) / max(fmax, 1e-300))
        a = a2
    if err > tol:
        raise TaylorError(f"doubling test failed at x = {x}: {err:.3g}")
    js = np.arange(-1, J + 1, 2)
    coef = np.array([watson_coefficient(a[j + 2], j) for j in js])
    powers = js / 2 + 1
    leading = 0.5 if base > 0 else 1.5
    if base == 0:
        coef, powers = coef[1:], powers[1:]
    return DispersiveSeries(float(x), powers, coef, float(R * R), J, leading, poles, err, float(r), fmax)


@dataclass(frozen=True)
class Truncation:
    value: complex
    error_estimate: float
    n_star: int
    saturated: bool
    required_J: int | None
    least_term: float
    noise: float = 0.0            # coefficient error carried into the partial sum


def optimal_truncate(series: DispersiveSeries, t: float, strict: bool = False) -> Truncation:
    """Sum through the smallest term; error estimate twice that term."""
    if t <= 0:
        raise ValueError("t must be positive")
    T = series.terms(t)
    mag = np.abs(T)
    n = int(np.argmin(mag))
    saturated = n == mag.size - 1
    required = None
    if saturated:
        # least term near n = rho t in half-integer steps; J counts kappa orders
        required = int(np.ceil(2 * series.rho * t + 12)) | 1
        if strict:
            raise SeriesTooShort(f"terms still decrease at the last order; need J about {required}", required)
    noise = float(np.sum(series.noise(t)[:n + 1]) + 2.2e-16 * np.max(mag[:n + 1]))
    return Truncation(complex(T[:n + 1].sum()), float(2 * mag[n]), n, saturated, required, float(mag[n]), noise)


def pole_correction(poles, t: float) -> complex:
    """Branch-cut contribution of the subtracted pole parts R/(kappa - kappa_j)."""
    total = 0j
    for k, Rk in poles:
        u = k / OMEGA
        total += -Rk / (2j * np.pi * OMEGA) * (pole_term_E(u, t) + pole_term_E(-u, t))
    return total


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvaluationReport:
    x: float
    t: float
    mode: str
    value: complex
    bound: complex
    gamow: complex
    dispersive: complex
    eterms: complex
    gamow_terms: list = field(default_factory=list)
    error_estimate: float = 0.0
    n_star: int = -1
    saturated: bool = False
    M: float = 0.0
    oracle_value: complex | None = None
    notes: list = field(default_factory=list)

    def breakdown(self) -> dict:
        return {"bound": self.bound, "gamow": self.gamow, "dispersive": self.dispersive, "eterms": self.eterms}


_SEARCH_CACHE: dict = {}


def cached_search(prob: Problem, k_max: int | None = None, M: float | None = None) -> ResonanceSearch:
    key = (prob.hash, k_max, M)
    if key not in _SEARCH_CACHE:
        _SEARCH_CACHE[key] = search_spectrum(prob, M=M, k_max=k_max)
    return _SEARCH_CACHE[key]


def _bound_sum(prob: Problem, bound, x: float, t: float) -> complex:
    total = 0j
    for b in bound:
        total += bound_coefficient(prob, b) * eigenfunction_values(prob, b, [x])[0] * np.exp(-1j * b.E * t)
    return total


def _gamow_terms(prob: Problem, resonances, x: float, t: float) -> list[complex]:
    out = []
    for r in resonances:
        if r.sheet != "first":
            continue
        g = 2j * r.kval * zero_strength(prob, r.kval, r.dW)
        out.append(complex(g * jost_plus(prob, r.kval, [x])[0] * np.exp(r.p * t)))
    return out


def _gamow_sum_converged(prob, x, t, budget, k0=25, kmax=200):
    """Gamow terms over enough first-sheet resonances that three in a row fall below budget."""
    k = k0
    while True:
        search = cached_search(prob, k_max=k)
        firsts = sorted(search.by_sheet("first"), key=lambda r: r.k)
        terms = _gamow_terms(prob, firsts, x, t)
        mags = np.abs(terms)
        small = mags < budget
        run = 0
        for i, s in enumerate(small):
            run = run + 1 if s else 0
            if run == 3:
                return terms[:i + 1], search
        if k >= kmax:
            raise GamowTailError(f"Gamow terms at t = {t} not below {budget:.3g} after {len(terms)} modes")
        k *= 2


def evaluate_wavefunction(prob: Problem, x: float, t: float, mode: str = "theorem1", M: float = 10.0,
                          J: int | None = None, k_max: int | None = None) -> EvaluationReport:
    """psi(x, t) from the decomposition.

    theorem1: bound states + Gamow modes (the first k_max, or as many as the error budget
    needs) + dispersive part.  With M > 0 the dispersive part is the least-term sum of the
    pole-subtracted series plus the pole terms; with M = 0 it is the plain least-term sum.
    When t < 2/rho it is taken from the branch-cut quadrature instead.
    approx2: bound states + Gamow modes with |p| <= M + pole terms for every zero with
    |p| <= M + least-term sum of the subtracted series.
    oracle-cross: theorem1 with the Bromwich value attached.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if mode not in ("theorem1", "approx2", "oracle-cross"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "approx2" and M <= 0:
        raise ValueError("approx2 needs M > 0")
    x, t = float(x), float(t)
    notes = []
    if prob.free:
        M = 0.0
        search = None
    else:
        search = cached_search(prob, M=max(2 * M, 40.0))
    ser = dispersive_series(prob, x, J=J, M=M, search=search, t_hint=t)
    tr = optimal_truncate(ser, t)
    eterms = pole_correction(ser.subtracted, t)
    disp, err = tr.value, tr.error_estimate + tr.noise
    if tr.saturated:
        notes.append(f"least term not reached (J = {ser.J}); need J about {tr.required_J}")
    noisy = tr.noise > max(tr.error_estimate, 1e-10 * abs(disp))
    if mode != "approx2" and (t < 2 / ser.rho or noisy or tr.n_star == 0):
        from .oracle import branch_cut_integral
        disp, err = branch_cut_integral(prob, x, t, return_error=True)
        eterms = 0j
        notes.append("dispersive part by branch-cut quadrature")
    if prob.free:
        bsum, terms = 0j, []
    else:
        bsum = _bound_sum(prob, search.bound, x, t)
        if mode == "approx2":
            firsts = [r for r in search.resonances if r.sheet == "first" and abs(r.p) <= M]
            terms = _gamow_terms(prob, firsts, x, t)
        elif k_max is not None:
            firsts = sorted(cached_search(prob, k_max=k_max).by_sheet("first"), key=lambda r: r.k)[:k_max]
            terms = _gamow_terms(prob, firsts, x, t)
        else:
            budget = 1e-3 * max(err, 1e-16 * max(abs(disp), abs(bsum), 1e-300))
            terms, _ = _gamow_sum_converged(prob, x, t, budget)
    gsum = complex(np.sum(terms)) if terms else 0j
    rep = EvaluationReport(x, t, mode, 0j, bsum, gsum, disp, eterms, terms, err, tr.n_star, tr.saturated, M,
                           notes=notes)
    rep.value = rep.bound + rep.gamow + rep.dispersive + rep.eterms
    if mode == "oracle-cross":
        from .oracle import bromwich_invert
        rep.oracle_value = bromwich_invert(prob, x, t)
    return rep
