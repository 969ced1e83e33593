"""Compactly supported potential and initial state, normalized so that supp V = [-1, 1].

User data may live on any interval. The potential's support [a, b] is mapped
onto [-1, 1] with x = c + s*xi, c = (a+b)/2, s = (b-a)/2.  In the normalized
variables the equation keeps the form i psi_t = -psi_xx + V psi provided the
potential is multiplied by s**2 and time is divided by s**2; the spectral
parameter p therefore picks up a factor s**2 (p_user = p_norm / s**2).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline


class ProblemError(ValueError):
    """Invalid problem description."""


# ---------------------------------------------------------------------------
# piecewise functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Piece:
    """One smooth piece on [a, b].

    ``func(x, d)`` returns the d-th derivative; ``const`` is the value when the
    piece is constant (None otherwise).
    """
    a: float
    b: float
    func: Callable[[np.ndarray, int], np.ndarray]
    const: complex | None = None

    def reflected(self) -> "Piece":
        f = self.func
        return Piece(-self.b, -self.a, lambda x, d: (-1) ** d * f(-np.asarray(x), d), self.const)


def _poly_piece(a: float, b: float, coeffs: Sequence[complex]) -> Piece:
    """Polynomial in the local variable (x - a), coefficients in increasing order."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if c.size == 0:
        c = np.zeros(1, dtype=complex)
    if np.all(c.imag == 0):
        c = c.real
    P = Polynomial(c)
    ders = [P, P.deriv(1), P.deriv(2)]

    def func(x, d, ders=ders, a=a):
        x = np.asarray(x, dtype=float)
        return ders[d](x - a)

    const = complex(c[0]) if c.size == 1 else None
    if const is not None and const.imag == 0:
        const = const.real
    return Piece(a, b, func, const)


@dataclass(frozen=True)
class PiecewiseFunction:
    """Function that is zero outside [breaks[0], breaks[-1]] and smooth on each piece."""
    pieces: tuple[Piece, ...]

    @property
    def support(self) -> tuple[float, float]:
        return (self.pieces[0].a, self.pieces[-1].b)

    @property
    def breaks(self) -> np.ndarray:
        return np.array([p.a for p in self.pieces] + [self.pieces[-1].b])

    @property
    def is_zero(self) -> bool:
        return all(p.const is not None and p.const == 0 for p in self.pieces)

    @property
    def piecewise_constant(self) -> bool:
        return all(p.const is not None for p in self.pieces)

    def __call__(self, x, d: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        n = len(self.pieces)
        for i, pc in enumerate(self.pieces):
            # pieces are half-open [a, b) except the last one, which is closed
            if i == n - 1:
                m = (x >= pc.a) & (x <= pc.b)
            else:
                m = (x >= pc.a) & (x < pc.b)
            if np.any(m):
                out[m] = pc.func(x[m], d)
        return out

    def piece_at(self, x: float) -> Piece | None:
        for pc in self.pieces:
            if pc.a <= x <= pc.b:
                return pc
        return None

    def reflected(self) -> "PiecewiseFunction":
        return PiecewiseFunction(tuple(p.reflected() for p in reversed(self.pieces)))

    def one_sided(self, x: float, d: int, side: int) -> complex:
        """Limit of the d-th derivative at x from the left (side=-1) or right (+1)."""
        for pc in self.pieces:
            if (side < 0 and pc.a < x <= pc.b) or (side > 0 and pc.a <= x < pc.b):
                return complex(pc.func(np.array([x]), d)[0])
        return 0j


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scaling:
    """Affine map x_user = center + half_width * x_norm."""
    center: float = 0.0
    half_width: float = 1.0

    @property
    def x_scale(self) -> float:
        """Normalized length per user length."""
        return 1.0 / self.half_width

    @property
    def t_scale(self) -> float:
        """Normalized time per user time."""
        return 1.0 / self.half_width ** 2

    @property
    def p_scale(self) -> float:
        """User p per normalized p."""
        return 1.0 / self.half_width ** 2

    def to_normalized(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.half_width

    def to_user(self, xi):
        return self.center + self.half_width * np.asarray(xi, dtype=float)

    def as_dict(self) -> dict:
        return {"center": self.center, "half_width": self.half_width,
                "x_scale": self.x_scale, "t_scale": self.t_scale, "p_scale": self.p_scale}


@dataclass(frozen=True)
class Potential:
    kind: str
    pw: PiecewiseFunction

    @property
    def support(self) -> tuple[float, float]:
        return self.pw.support

    @property
    def is_zero(self) -> bool:
        return self.pw.is_zero

    def endpoint(self, x: float, d: int = 0) -> float:
        """One-sided derivative at a support endpoint, taken from inside."""
        side = 1 if x <= self.support[0] else -1
        return float(self.pw.one_sided(x, d, side).real)

    @property
    def endpoint_values(self) -> dict:
        return {f"V{'′' * d}({s:+d})": self.endpoint(float(s), d) for s in (-1, 1) for d in range(3)}


@dataclass(frozen=True)
class InitialState:
    kind: str
    pw: PiecewiseFunction

    @property
    def support(self) -> tuple[float, float]:
        return self.pw.support

    @property
    def M(self) -> float:
        a, b = self.support
        return max(abs(a), abs(b))


@dataclass(frozen=True)
class Problem:
    potential: Potential
    initial: InitialState
    scaling: Scaling = field(default_factory=Scaling)
    name: str = ""
    source: dict | None = field(default=None, compare=False, repr=False)

    @property
    def free(self) -> bool:
        return self.potential.is_zero

    @property
    def M(self) -> float:
        return self.initial.M

    @property
    def X(self) -> float:
        return max(self.M, 1.0)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.source, sort_keys=True) if self.source else repr(self)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_initial(self, initial: InitialState) -> "Problem":
        return Problem(self.potential, initial, self.scaling, self.name, None)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        z = complex(float(v[0]), float(v[1]))
    elif isinstance(v, dict):
        z = complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    else:
        z = complex(v)
    if not np.isfinite(z):
        raise ProblemError(f"non-finite amplitude {v!r}")
    return z


def _interval(v, what: str) -> tuple[float, float]:
    try:
        a, b = float(v[0]), float(v[1])
    except (TypeError, IndexError, ValueError) as exc:
        raise ProblemError(f"{what}: support must be a pair [a, b]") from exc
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ProblemError(f"{what}: support must be finite")
    if not b > a:
        raise ProblemError(f"{what}: empty support [{a}, {b}]")
    return a, b


def _polynomial_pieces(d: dict, what: str, s: float, c: float, amp: float) -> tuple[list[Piece], tuple[float, float]]:
    """Pieces from user breaks/coefficients, mapped to normalized coordinates.

    A user polynomial sum_k c_k (x - a)^k becomes amp * sum_k c_k s^k (xi - xi_a)^k.
    """
    breaks = np.asarray(d.get("breaks"), dtype=float)
    coeffs = d.get("coefficients")
    if breaks.ndim != 1 or breaks.size < 2 or coeffs is None or len(coeffs) != breaks.size - 1:
        raise ProblemError(f"{what}: need breaks (n+1) and coefficients (n lists)")
    if np.any(np.diff(breaks) <= 0) or not np.all(np.isfinite(breaks)):
        raise ProblemError(f"{what}: breaks must be finite and increasing")
    pieces = []
    for i, cl in enumerate(coeffs):
        cc = np.array([_as_complex(v) for v in cl]) * amp * s ** np.arange(len(cl))
        a, b = (breaks[i] - c) / s, (breaks[i + 1] - c) / s
        pieces.append(_poly_piece(a, b, cc))
    return pieces, (breaks[0], breaks[-1])


def _spline_pieces(d: dict, what: str, s: float, c: float, amp: float) -> tuple[list[Piece], tuple[float, float]]:
    x = np.asarray(d.get("x"), dtype=float)
    y = np.asarray([_as_complex(v) for v in d.get("values", d.get("v", []))])
    if x.ndim != 1 or x.size < 4 or y.size != x.size:
        raise ProblemError(f"{what}: sampled data needs at least 4 points")
    if np.any(np.diff(x) <= 0) or not np.all(np.isfinite(x)):
        raise ProblemError(f"{what}: sample abscissae must be finite and increasing")
    if np.all(y.imag == 0):
        y = y.real
    cs = CubicSpline(x, y, bc_type="natural")
    pieces = []
    for i in range(x.size - 1):
        cc = cs.c[::-1, i] * amp * s ** np.arange(4)
        pieces.append(_poly_piece((x[i] - c) / s, (x[i + 1] - c) / s, cc))
    return pieces, (x[0], x[-1])


def _gaussian_piece(d: dict, s: float, c: float) -> tuple[list[Piece], tuple[float, float]]:
    """A exp(-(x-x0)^2/(2 w^2) + i k x) * (1 - ((x-m)/h)^2)^3 on [m-h, m+h]."""
    lo, hi = _interval(d.get("support"), "initial")
    A = _as_complex(d.get("amplitude", 1.0))
    x0 = (float(d.get("center", 0.0)) - c) / s
    w = float(d.get("width", 0.25)) / s
    k = float(d.get("momentum", 0.0)) * s
    if not (w > 0 and np.isfinite(w) and np.isfinite(k) and np.isfinite(x0)):
        raise ProblemError("gaussian-cutoff: width must be positive and parameters finite")
    a, b = (lo - c) / s, (hi - c) / s
    m, h = 0.5 * (a + b), 0.5 * (b - a)

    def func(x, dd):
        x = np.asarray(x, dtype=float)
        g1 = -(x - x0) / w ** 2 + 1j * k
        g = A * np.exp(-(x - x0) ** 2 / (2 * w ** 2) + 1j * k * x)
        z = (x - m) / h
        q = 1 - z * z
        cut = [q ** 3, -6 * z * q ** 2 / h, (-6 * q ** 2 + 24 * z * z * q) / h ** 2]
        gd = [g, g * g1, g * (g1 ** 2 - 1 / w ** 2)]
        if dd == 0:
            return gd[0] * cut[0]
        if dd == 1:
            return gd[1] * cut[0] + gd[0] * cut[1]
        return gd[2] * cut[0] + 2 * gd[1] * cut[1] + gd[0] * cut[2]

    return [Piece(a, b, func, None)], (lo, hi)


def _pieces(d: dict, what: str, s: float, c: float, amp: float, allow_gauss: bool):
    kind = d.get("kind")
    if kind in ("square-step", "indicator"):
        lo, hi = _interval(d.get("support"), what)
        h = _as_complex(d.get("height", d.get("amplitude", 1.0))) * amp
        return "square-step", [_poly_piece((lo - c) / s, (hi - c) / s, [h])], (lo, hi)
    if kind == "zero":
        lo, hi = _interval(d.get("support", [-1.0, 1.0]), what)
        return "zero", [_poly_piece((lo - c) / s, (hi - c) / s, [0.0])], (lo, hi)
    if kind == "piecewise-polynomial":
        return (kind, *_polynomial_pieces(d, what, s, c, amp))
    if kind == "sampled-with-spline":
        return (kind, *_spline_pieces(d, what, s, c, amp))
    if kind == "gaussian-cutoff" and allow_gauss:
        return (kind, *_gaussian_piece(d, s, c))
    raise ProblemError(f"{what}: unknown kind {kind!r}")


def _check_continuity(pieces: list[Piece], what: str) -> None:
    for left, right in zip(pieces[:-1], pieces[1:]):
        if abs(left.b - right.a) > 1e-12 * max(1.0, abs(left.b)):
            raise ProblemError(f"{what}: pieces must be contiguous")
        vl = complex(left.func(np.array([left.b]), 0)[0])
        vr = complex(right.func(np.array([right.a]), 0)[0])
        if abs(vl - vr) > 1e-9 * max(1.0, abs(vl), abs(vr)):
            raise ProblemError(f"{what}: interior jump at x = {left.b:g} ({vl:g} vs {vr:g})")


def _support_of(d: dict, what: str) -> tuple[float, float]:
    if "support" in d:
        return _interval(d["support"], what)
    if "breaks" in d:
        b = d["breaks"]
        return _interval([b[0], b[-1]], what)
    if "x" in d:
        x = d["x"]
        if len(x) < 4:
            raise ProblemError(f"{what}: sampled data needs at least 4 points")
        return _interval([x[0], x[-1]], what)
    return (-1.0, 1.0)


def build_problem(spec: dict, name: str = "") -> Problem:
    """Build a normalized Problem from a JSON-style description.

    The potential support is rescaled onto [-1, 1]; the map is stored in
    ``Problem.scaling``.
    """
    if not isinstance(spec, dict) or "potential" not in spec or "initial" not in spec:
        raise ProblemError("problem must declare 'potential' and 'initial'")
    pot, ini = spec["potential"], spec["initial"]
    lo, hi = _support_of(pot, "potential")
    c, s = 0.5 * (lo + hi), 0.5 * (hi - lo)
    # exact identity map when the support is already [-1, 1]
    if lo == -1.0 and hi == 1.0:
        c, s = 0.0, 1.0
    kind, vp, _ = _pieces(pot, "potential", s, c, s * s, allow_gauss=False)
    for pc in vp:
        if pc.const is not None and np.imag(pc.const) != 0:
            raise ProblemError("potential must be real")
    _check_continuity(vp, "potential")
    # snap the outer breaks exactly onto +-1
    vp[0] = Piece(-1.0, vp[0].b, vp[0].func, vp[0].const)
    vp[-1] = Piece(vp[-1].a, 1.0, vp[-1].func, vp[-1].const)
    ikind, ip, _ = _pieces(ini, "initial", s, c, 1.0, allow_gauss=True)
    _check_continuity(ip, "initial")
    potential = Potential(kind, PiecewiseFunction(tuple(vp)))
    if potential.is_zero:
        potential = Potential("zero", potential.pw)
    initial = InitialState(ikind, PiecewiseFunction(tuple(ip)))
    return Problem(potential, initial, Scaling(c, s), name or spec.get("name", ""), spec)


def load_problem(path: str) -> Problem:
    with open(path) as fh:
        spec = json.load(fh)
    return build_problem(spec)


def eval_potential(prob: Problem, x, d: int = 0):
    """V^(d)(x) in normalized coordinates; exactly zero outside the support."""
    if d not in (0, 1, 2):
        raise ValueError("derivative order must be 0, 1 or 2")
    out = prob.potential.pw(x, d).real
    return out if np.ndim(x) else float(out)


def eval_initial(prob: Problem, x, d: int = 0):
    """psi_0^(d)(x) in normalized coordinates; exactly zero outside the support."""
    if d not in (0, 1, 2):
        raise ValueError("derivative order must be 0, 1 or 2")
    out = prob.initial.pw(x, d)
    return out if np.ndim(x) else complex(out)


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

def square_barrier(height: float = 1.0, support=(-1.0, 1.0), psi_support=(-0.5, 0.5)) -> Problem:
    return build_problem({
        "name": "square-barrier" if height > 0 else "square-well",
        "potential": {"kind": "square-step", "support": list(support), "height": height},
        "initial": {"kind": "square-step", "support": list(psi_support), "height": 1.0},
    })


def free_problem(psi_support=(-0.5, 0.5)) -> Problem:
    return build_problem({
        "name": "free",
        "potential": {"kind": "zero", "support": [-1.0, 1.0]},
        "initial": {"kind": "square-step", "support": list(psi_support), "height": 1.0},
    })


FIXTURES = {
    "paper-square-barrier": lambda: square_barrier(1.0),
    "square-well": lambda: square_barrier(-4.0),
    "free": free_problem,
}


def fixture(name: str) -> Problem:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ProblemError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
