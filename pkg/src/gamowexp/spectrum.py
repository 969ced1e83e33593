"""Bound states and resonances: zeros of W(kappa).

Resonances are seeded from the large-k law
p_k ~ -i pi^2 k^2 / 4 - c k log(s k), c in {pi, 5pi/4, 3pi/2} by the number of
vanishing endpoint values of V, and refined by Newton's method in kappa.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .problem import Problem
from .resolvent import winding_number
from .shooting import SolutionTrace, SpectralPoint, scaled_jost, sheet_of, wronskian_array

SHEET_ORDER = {"physical": 0, "first": 1, "mirror": 2, "second": 3, "boundary": 4}


class ResonanceError(RuntimeError):
    pass


class NoConvergence(ResonanceError):
    pass


class DuplicateZero(ResonanceError):
    pass


class EscapedRegion(ResonanceError):
    pass


class MissingZeros(UserWarning):
    pass


@dataclass(frozen=True)
class Resonance:
    kappa: SpectralPoint
    residue_invW: complex
    k: int
    iterations: int
    abs_w: float
    dW: complex
    seed: complex = complex("nan")

    @property
    def p(self) -> complex:
        return self.kappa.p

    @property
    def gamma(self) -> complex:
        return -self.p

    @property
    def sheet(self) -> str:
        return self.kappa.sheet

    @property
    def kval(self) -> complex:
        return self.kappa.kappa


@dataclass(frozen=True)
class BoundState:
    E: float
    kappa: float
    eigenfunction: SolutionTrace
    norm: float
    residue_invW: complex
    tail_ratio: float = 1.0      # y+ = tail_ratio * exp(kappa x) for x <= -1

    @property
    def p(self) -> complex:
        return -1j * self.E


# ---------------------------------------------------------------------------
# seeds and refinement
# ---------------------------------------------------------------------------

def log_coefficient(prob: Problem) -> float:
    """pi, 5pi/4 or 3pi/2 depending on how many of V(-1), V(1) vanish."""
    pot = prob.potential
    zeros = sum(abs(pot.endpoint(float(s))) < 1e-14 for s in (-1, 1))
    return {0: np.pi, 1: 1.25 * np.pi, 2: 1.5 * np.pi}[zeros]


def asymptotic_seeds(prob: Problem, k_range, log_scale: float = np.pi) -> list[complex]:
    """Seeds p_k = -i pi^2 k^2/4 - c k log(log_scale k) for k in k_range.

    log_scale = pi reproduces the large-k comparison law for the barrier; log_scale = 1
    gives the bare k log k form.
    """
    c = log_coefficient(prob)
    ks = range(k_range[0], k_range[1] + 1) if isinstance(k_range, tuple) else k_range
    return [complex(-0.25j * np.pi ** 2 * k * k - c * k * np.log(log_scale * k)) for k in ks]


def _W(prob, k):
    return complex(wronskian_array(prob, np.array([k]))[0])


def dW_dkappa(prob: Problem, kappa: complex, rho: float | None = None, n: int = 16) -> complex:
    """W'(kappa) by a Cauchy integral on a small circle (spectrally accurate)."""
    kappa = complex(kappa)
    rho = 1e-2 * max(1.0, abs(kappa)) ** 0.5 if rho is None else rho
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    z = kappa + rho * np.exp(1j * th)
    return complex(np.mean(wronskian_array(prob, z) * np.exp(-1j * th)) / rho)


def gamow_kappa(p: complex) -> complex:
    """The root of kappa^2 = -i p in the third quadrant (continued across the cut)."""
    k = np.sqrt(-1j * complex(p))
    if k.real > 0 or (k.real == 0 and k.imag > 0):
        k = -k
    return complex(k)


def newton_kappa(prob: Problem, kappa0: complex, maxit: int = 50, tol: float = 1e-12):
    """Damped Newton on W(kappa) with a central-difference derivative.

    Stops at |dk| < tol |kappa| or, failing that, at the rounding floor (steps that
    no longer shrink once below 1e-9 |kappa|).  Returns (kappa, iterations).
    """
    k = complex(kappa0)
    prev = np.inf
    for it in range(1, maxit + 1):
        h = 1e-6 * max(abs(k), 1e-3)
        Wk = _W(prob, k)
        d = (_W(prob, k + h) - _W(prob, k - h)) / (2 * h)
        if d == 0 or not np.isfinite(d) or not np.isfinite(Wk):
            raise NoConvergence(f"degenerate derivative at kappa = {k}")
        dk = Wk / d
        lim = 0.4
        if abs(dk) > lim:
            dk *= lim / abs(dk)
        k -= dk
        size = abs(dk) / max(abs(k), 1e-300)
        if size < tol or (size < 1e-9 and abs(dk) > 0.5 * prev):
            return k, it
        prev = abs(dk)
    raise NoConvergence(f"Newton did not converge in {maxit} steps from kappa = {kappa0}")


def _make_resonance(prob: Problem, k: complex, idx: int, its: int, seed: complex) -> Resonance:
    if abs(k) < 1e-8:
        raise NoConvergence("iteration collapsed onto the threshold kappa = 0")
    dW = dW_dkappa(prob, k)
    Wk = _W(prob, k)
    return Resonance(SpectralPoint(k), 2j * k / dW, idx, its, abs(Wk), dW, seed)


def refine_resonance(prob: Problem, seed: complex, k: int = 0, known=(), kappa_seed: complex | None = None,
                     allow_right: bool = False) -> Resonance:
    """Newton refinement of a seed p (kappa continued into the third quadrant)."""
    k0 = gamow_kappa(seed) if kappa_seed is None else complex(kappa_seed)
    kap, its = newton_kappa(prob, k0)
    res = _make_resonance(prob, kap, k, its, complex(seed))
    if not allow_right and res.p.real > 1e-10 * abs(res.p):
        raise EscapedRegion(f"converged to p = {res.p:.6g} in the right half-plane")
    for other in known:
        if abs(other.kval - kap) < 1e-6 * (1 + abs(kap)):
            raise DuplicateZero(f"kappa = {kap:.8g} already recorded (k = {other.k})")
    return res


# ---------------------------------------------------------------------------
# completeness
# ---------------------------------------------------------------------------

def count_zeros_disk(prob: Problem, R: float, n0: int = 4000, nmax: int = 128000) -> int:
    """Zeros of W inside |kappa| < R (argument principle, nodes doubled until phase is resolved)."""
    n = n0
    while True:
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        Wc = wronskian_array(prob, R * np.exp(1j * th))
        d = np.diff(np.unwrap(np.angle(np.concatenate([Wc, Wc[:1]]))))
        if np.max(np.abs(d)) < np.pi / 4 or n >= nmax:
            return winding_number(Wc)
        n *= 2


def _safe_radius(R: float, kappas: list[complex], gap: float = 0.05) -> float:
    for _ in range(200):
        if all(abs(abs(k) - R) > gap for k in kappas):
            return R
        R += gap
    return R


def grid_search(prob: Problem, R: float, n: int = 40, known=()) -> list[Resonance]:
    """Newton from a polar grid of starts inside |kappa| < R; used to recover missed zeros."""
    found = list(known)
    new = []
    rs = np.linspace(0.15, 1.0, n // 4) * R
    for r in rs:
        for th in np.linspace(-np.pi, np.pi, n, endpoint=False):
            k0 = r * np.exp(1j * th)
            try:
                kap, its = newton_kappa(prob, k0, maxit=30)
            except ResonanceError:
                continue
            if abs(kap) < 1e-6 or abs(kap) > R:
                continue
            if any(abs(o.kval - kap) < 1e-6 * (1 + abs(kap)) for o in found):
                continue
            try:
                res = _make_resonance(prob, kap, 0, its, complex("nan"))
            except ResonanceError:
                continue
            found.append(res)
            new.append(res)
    return new


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

@dataclass
class ResonanceSearch:
    resonances: list[Resonance]
    bound: list[BoundState]
    radius: float
    counted: int
    expected: int
    complete: bool
    threshold_zeros: int = 0
    notes: list[str] = field(default_factory=list)

    def by_sheet(self, sheet: str) -> list[Resonance]:
        return [r for r in self.resonances if r.sheet == sheet]


def _sort_key(r: Resonance):
    return (SHEET_ORDER.get(r.sheet, 9), r.gamma.real, r.gamma.imag)


def find_resonances(prob: Problem, M: float | None = None, k_max: int | None = None,
                    log_scale: float = np.pi, check: bool = True, mirrors: bool = True,
                    recover: bool = True) -> list[Resonance]:
    return search_spectrum(prob, M, k_max, log_scale, check, mirrors, recover).resonances


def search_spectrum(prob: Problem, M: float | None = None, k_max: int | None = None,
                    log_scale: float = np.pi, check: bool = True, mirrors: bool = True,
                    recover: bool = True) -> ResonanceSearch:
    """All zeros from seeds k = 1..k_max (or up to |p| <= M), their mirrors, and a completeness count."""
    if (M is None or M <= 0) and (k_max is None or k_max < 1):
        raise ValueError("need M > 0 or k_max >= 1")
    found: list[Resonance] = []
    notes = []
    if not prob.free:
        k = 1
        while True:
            if k_max is not None and k > k_max:
                break
            seed = asymptotic_seeds(prob, [k], log_scale)[0]
            if M is not None and k_max is None and abs(seed) > 1.5 * M + 20:
                break
            r = _seeded_zero(prob, seed, k, found, notes)
            if r is not None:
                found.append(r)
            k += 1
            if k > 400:
                break
    if M is not None:
        found = [r for r in found if abs(r.p) <= M]
    bound = bound_states(prob)
    # real zeros with kappa > 0 are the bound states, reported separately
    found = [r for r in found if not (r.sheet == "physical" and abs(r.kval.imag) < 1e-8 * abs(r.kval))]
    allz = list(found)
    if mirrors:
        for r in list(found):
            if r.sheet == "first":
                kap, its = newton_kappa(prob, np.conj(r.kval))
                if abs(kap - np.conj(r.kval)) < 1e-6 * (1 + abs(kap)):
                    m = _make_resonance(prob, kap, r.k, its, np.conj(-r.seed) if np.isfinite(r.seed) else r.seed)
                    allz.append(m)
    # completeness in a disk covering everything found
    threshold = 0
    try:
        from .resolvent import threshold_zero_order
        threshold = threshold_zero_order(prob, 1e-3)
    except Exception:  # pragma: no cover - defensive
        pass
    kap_all = [r.kval for r in allz] + [b.kappa for b in bound]
    if M is not None:
        R = np.sqrt(M)
    else:
        R = max([abs(k) for k in kap_all], default=1.0) + 0.3
    R = _safe_radius(R, kap_all)
    counted = expected = 0
    complete = True
    if check:
        counted = count_zeros_disk(prob, R)
        expected = sum(abs(k) < R for k in kap_all) + threshold
        if counted != expected and recover:
            extra = grid_search(prob, R, known=allz + [_bound_as_res(prob, b) for b in bound])
            if extra:
                notes.append(f"grid search recovered {len(extra)} zero(s)")
                allz.extend(extra)
                kap_all += [r.kval for r in extra]
                R = _safe_radius(R, kap_all)
                counted = count_zeros_disk(prob, R)
                expected = sum(abs(k) < R for k in kap_all) + threshold
        complete = counted == expected
        if not complete:
            warnings.warn(f"argument principle counts {counted} zeros in |kappa| < {R:.4g} "
                          f"but {expected} are known", MissingZeros)
    if M is not None:
        allz = [r for r in allz if abs(r.p) <= M]
    allz = _rank(allz)
    allz.sort(key=_sort_key)
    return ResonanceSearch(allz, bound, R, counted, expected, complete, threshold, notes)


def _seeded_zero(prob, seed, k, found, notes):
    """Newton from the asymptotic seed; on failure or a repeat, from continuation seeds."""
    starts = [None]
    firsts = [r.kval for r in found if r.sheet == "first"]
    if len(firsts) >= 2:
        a, b = sorted(firsts, key=abs)[-2:]
        starts.append(2 * b - a)
    if firsts:
        starts.append(max(firsts, key=abs) - 0.5j * np.pi)
    last = None
    for st in starts:
        try:
            return refine_resonance(prob, seed, k, found, kappa_seed=st)
        except ResonanceError as e:
            last = e
    notes.append(f"k={k}: {last}")
    return None


def _rank(zeros: list[Resonance]) -> list[Resonance]:
    """Index first-sheet zeros (and their mirrors) by increasing |p|."""
    from dataclasses import replace
    firsts = sorted([r for r in zeros if r.sheet == "first"], key=lambda r: abs(r.p))
    out = []
    for i, r in enumerate(firsts, 1):
        out.append(replace(r, k=i))
    for r in zeros:
        if r.sheet == "first":
            continue
        idx = 0
        if r.sheet == "mirror":
            m = [i for i, f in enumerate(firsts, 1) if abs(np.conj(f.kval) - r.kval) < 1e-6 * (1 + abs(r.kval))]
            idx = m[0] if m else 0
        out.append(replace(r, k=idx))
    return out


def _bound_as_res(prob, b: BoundState) -> Resonance:
    return Resonance(SpectralPoint(complex(b.kappa)), b.residue_invW, 0, 0, 0.0, 0j)


# ---------------------------------------------------------------------------
# bound states
# ---------------------------------------------------------------------------

def _gl_integral_sq(prob: Problem, kappa: float) -> tuple[float, float]:
    """int_{-1}^{1} y+^2 dx and y+(-1) for real kappa."""
    xg, wg = np.polynomial.legendre.leggauss(40)
    br = prob.potential.pw.breaks
    total = 0.0
    for a, b in zip(br[:-1], br[1:]):
        n = max(1, int(np.ceil((b - a) * max(kappa, 1.0) / 2)))
        edges = np.linspace(a, b, n + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
            _, _, up, _ = scaled_jost(prob, [kappa], s)
            y = (up[0] * np.exp(-kappa * s)).real
            total += 0.5 * (hi - lo) * float((y * y) @ wg)
    _, _, up, _ = scaled_jost(prob, [kappa], [-1.0])
    return total, float((up[0, 0] * np.exp(kappa)).real)


def bound_states(prob: Problem, n_grid: int = 4000, x=None) -> list[BoundState]:
    """Real zeros of W on (0, sqrt(max(1, -min V)) + 1], by sign changes of W and bisection."""
    if prob.free:
        return []
    xs = np.linspace(-1, 1, 2001)
    vmin = float(np.min(np.real(prob.potential.pw(xs))))
    top = np.sqrt(max(1.0, -vmin)) + 1.0
    ks = np.linspace(top / n_grid, top, n_grid)
    Wv = wronskian_array(prob, ks).real
    out = []

    def f(k):
        return float(wronskian_array(prob, [k])[0].real)

    for i in np.nonzero(np.sign(Wv[:-1]) * np.sign(Wv[1:]) < 0)[0]:
        kb = brentq(f, ks[i], ks[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        out.append(_bound_state(prob, kb, x))
    return sorted(out, key=lambda b: b.E)


def _bound_state(prob: Problem, kb: float, x=None) -> BoundState:
    inner, ym1 = _gl_integral_sq(prob, kb)
    # y+ = e^{-kx} for x > 1 and y+ = c e^{kx} for x < -1 with c = y+(-1) e^{k}
    c = ym1 * np.exp(kb)
    tails = np.exp(-2 * kb) / (2 * kb) * (1 + c * c)
    norm = float(np.sqrt(inner + tails))
    X = prob.X
    xs = np.unique(np.concatenate([np.linspace(-X, X, 401), prob.potential.pw.breaks])) if x is None \
        else np.sort(np.asarray(x, float))
    _, _, up, vp = scaled_jost(prob, [kb], xs)
    trace = SolutionTrace(xs, up[0] / norm, vp[0] / norm, -kb * xs, SpectralPoint(complex(kb)), "bound")
    dW = dW_dkappa(prob, kb)
    return BoundState(-kb * kb, kb, trace, norm, 2j * kb / dW, c)


def eigenfunction_values(prob: Problem, bs: BoundState, x) -> np.ndarray:
    """Normalized bound-state eigenfunction at arbitrary x."""
    x = np.asarray(x, dtype=float)
    lo = float(prob.potential.support[0])
    order = np.argsort(x)
    _, _, up, _ = scaled_jost(prob, [bs.kappa], x[order])
    out = np.empty(x.shape)
    out[order] = (up[0] * np.exp(-bs.kappa * x[order])).real / bs.norm
    # left of the support y+ is a multiple of exp(kappa x); integrating towards it
    # only amplifies rounding in the discarded growing mode
    left = x < lo
    if np.any(left):
        _, _, ul, _ = scaled_jost(prob, [bs.kappa], [lo])
        out[left] = (ul[0, 0] * np.exp(-bs.kappa * lo)).real * np.exp(bs.kappa * (x[left] - lo)) / bs.norm
    return out


# ---------------------------------------------------------------------------
# asymptotic law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    k: np.ndarray
    A: float                 # coefficient of k^2 in Im p_k
    A_ratio: float           # A / (-pi^2/4)
    c: float                 # coefficient of -k log k in Re p_k
    c_ratio: float           # c / (log coefficient of the case)
    misfit_im: float
    misfit_re: float
    im_over_k2: np.ndarray
    params_im: np.ndarray
    params_re: np.ndarray


def pole_scaling_check(resonances, c_expected: float = np.pi) -> ScalingFit:
    """Least squares: Im p_k ~ A k^2 + B k + C log^2 k + D log k + E; Re p_k ~ -c k log k + a k + b log k + d."""
    rs = [r for r in resonances if getattr(r, "sheet", "first") == "first"]
    if len(rs) < 8:
        raise ValueError(f"need at least 8 first-sheet resonances, got {len(rs)}")
    k = np.array([r.k for r in rs], dtype=float)
    p = np.array([r.p for r in rs])
    lk = np.log(k)
    Ai = np.column_stack([k * k, k, lk * lk, lk, np.ones_like(k)])
    Ar = np.column_stack([-k * lk, k, lk, np.ones_like(k)])
    if k.size < Ai.shape[1] + 1:
        Ai = Ai[:, :3]
    pi_, *_ = np.linalg.lstsq(Ai, p.imag, rcond=None)
    pr_, *_ = np.linalg.lstsq(Ar, p.real, rcond=None)
    mi = float(np.linalg.norm(Ai @ pi_ - p.imag) / np.linalg.norm(p.imag))
    mr = float(np.linalg.norm(Ar @ pr_ - p.real) / np.linalg.norm(p.real))
    return ScalingFit(k, float(pi_[0]), float(pi_[0] / (-np.pi ** 2 / 4)), float(pr_[0]),
                      float(pr_[0] / c_expected), mi, mr, p.imag / k ** 2, pi_, pr_)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["k", "re_p", "im_p", "re_res", "im_res", "sheet", "abs_w", "seed_re", "seed_im"]


def resonance_rows(resonances, p_scale: float = 1.0) -> list[dict]:
    rows = []
    for r in resonances:
        rows.append({"k": r.k, "re_p": r.p.real * p_scale, "im_p": r.p.imag * p_scale,
                     "re_res": r.residue_invW.real, "im_res": r.residue_invW.imag,
                     "sheet": r.sheet, "abs_w": r.abs_w,
                     "seed_re": r.seed.real * p_scale, "seed_im": r.seed.imag * p_scale})
    return rows


def resonances_csv(resonances, p_scale: float = 1.0) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in resonance_rows(resonances, p_scale):
        w.writerow([row[c] if isinstance(row[c], (int, str)) else f"{row[c]:.17g}" for c in CSV_COLUMNS])
    return buf.getvalue()
