"""Closed forms for V = a on [-1, 1] (a > 0 barrier, a < 0 well).

With q = sqrt(kappa^2 + a) the Wronskian of the Jost pair is

    W(kappa) = exp(-2 kappa) [2 kappa cosh 2q + (q^2 + kappa^2)/q sinh 2q],

an even function of q, hence entire in kappa.  Its zeros satisfy
exp(4q) (q + kappa)^2 = (q - kappa)^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shooting import SpectralPoint, shifted_root


class DivergentIteration(RuntimeError):
    pass


@dataclass(frozen=True)
class SquareProblem:
    a: float = 1.0

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("amplitude must be nonzero")


def _kappa(p=None, kappa=None, physical=True):
    if kappa is not None:
        return np.asarray(kappa, dtype=complex)
    p = np.asarray(p, dtype=complex)
    k = np.sqrt(-1j * p)
    k = np.where(k.real < 0, -k, k)
    return k if physical else -k


def _G(kappa, a):
    q = shifted_root(kappa, a)
    with np.errstate(divide="ignore", invalid="ignore"):
        shq = np.where(np.abs(q) < 1e-8, 2.0 + 0j, np.sinh(2 * q) / np.where(q == 0, 1, q))
    return 2 * kappa * np.cosh(2 * q) + (q * q + kappa * kappa) * shq


def wronskian_closed_form(sq: SquareProblem, p=None, physical: bool = True, kappa=None):
    """Exact W; kappa = sqrt(-i p) on the physical side unless physical=False (or kappa given)."""
    k = _kappa(p, kappa, physical)
    return np.exp(-2 * k) * _G(k, sq.a)


def dwronskian_dkappa(sq: SquareProblem, kappa):
    k = np.asarray(kappa, dtype=complex)
    q = shifted_root(k, sq.a)
    c2, s2 = np.cosh(2 * q), np.sinh(2 * q)
    s = q * q + k * k
    dG = (2 * c2 + 4 * k * k / q * s2 + (4 * k / q - s * k / q ** 3) * s2 + 2 * s * k / (q * q) * c2)
    return np.exp(-2 * k) * (dG - 2 * _G(k, sq.a))


def negated_wronskian_form(p, kappa=None):
    """Reference closed form for the unit barrier, with every root taken on the branch tied to kappa.

    sqrt(-ip) -> kappa, sqrt(p) -> sqrt(i) kappa, sqrt(i+p) -> sqrt(i) q, sqrt(1-ip) -> q.
    Numerically this equals -W.
    """
    k = _kappa(p, kappa)
    p = 1j * k * k
    q = shifted_root(k, 1.0)
    si = np.exp(0.25j * np.pi)
    rp, rip = si * k, si * q
    pre = np.exp(-0.25j * np.pi) * np.exp(-2 * k + 2 * q) / (2 * rip)
    return pre * (np.exp(-4 * q) * (1j + 2 * p - 2 * rp * rip) - 1j - 2 * p - 2 * rp * rip)


def _zmap(z, k, a, exact: bool = True):
    """One step of the location map for the k-th zero, generalized to amplitude a.

    With w = k pi/2 + z, kappa = -i w, the zero condition exp(4q) (q+kappa)^2 = (q-kappa)^2
    becomes z = (i/4) log((q-kappa)^2/(q+kappa)^2) - i (q - kappa).  Dropping the last
    term gives the purely asymptotic map.  The logarithm is continued from the current
    iterate (branch nearest z), since for small k the fixed point sits on the principal cut.
    """
    w = k * np.pi / 2 + z
    kap = -1j * w
    q = shifted_root(kap, a)
    num = a + 2 * kap * kap - 2 * kap * q     # (q - kappa)^2
    den = a + 2 * kap * kap + 2 * kap * q     # (q + kappa)^2
    base = 0.25j * np.log(num / den)
    if exact:
        base = base - 1j * (q - kap)
    cands = base + np.array([-1, 0, 1]) * (-0.5 * np.pi)
    return cands[np.argmin(np.abs(cands - z))]


def newton_polish(sq: SquareProblem, kappa0: complex, tol: float = 1e-12, maxit: int = 60) -> complex:
    """Damped Newton on the exact W; stops at tol*|kappa| or at the rounding floor."""
    k = complex(kappa0)
    prev = np.inf
    for _ in range(maxit):
        dk = complex(wronskian_closed_form(sq, kappa=k) / dwronskian_dkappa(sq, k))
        if abs(dk) > 0.5:
            dk *= 0.5 / abs(dk)
        k -= dk
        size = abs(dk) / max(1.0, abs(k))
        if size < tol or (size < 1e-9 and abs(dk) > 0.5 * prev):
            return k
        prev = abs(dk)
    raise DivergentIteration(f"Newton did not converge from kappa = {kappa0}")


def iterate_z(sq: SquareProblem, k: int = 1, maxit: int = 400, tol: float = 1e-10, z0: complex = 0j,
              exact: bool = True):
    """Fixed point of the asymptotic map; returns (z, p, iterations).

    The map is contractive only for large k, so the step is relaxed:
    z <- z + (F(z) - z) / 2.
    """
    z = complex(z0)
    theta = 0.5
    for it in range(1, maxit + 1):
        fz = complex(_zmap(z, k, sq.a, exact))
        if not np.isfinite(fz):
            raise DivergentIteration("asymptotic map produced a non-finite value")
        res = abs(fz - z)
        if res < tol * max(1.0, abs(fz)):
            z = fz
            break
        z = z + theta * (fz - z)
    else:
        raise DivergentIteration(f"z-iteration did not settle in {maxit} steps")
    return z, -1j * (k * np.pi / 2 + z) ** 2, it


def iterate_first_pole(sq: SquareProblem, k: int = 1, polish: bool = True) -> complex:
    """p of the k-th Gamow pole: z-iteration followed by Newton on the exact W."""
    z, p, _ = iterate_z(sq, k)
    if not polish:
        return p
    kap = newton_polish(sq, -1j * (k * np.pi / 2 + z))
    return SpectralPoint(kap).p


def residue_closed_form(sq: SquareProblem, p_k: complex = None, kappa: complex = None) -> complex:
    """Residue of 1/W in p at a simple zero: 2 i kappa / W'(kappa)."""
    if kappa is None:
        kappa = newton_polish(sq, complex(_kappa(p_k, physical=False)) if np.angle(-np.sqrt(-1j * p_k)) < 0
                              else complex(_kappa(p_k)))
    dW = complex(dwronskian_dkappa(sq, kappa))
    if abs(dW) < 1e-12:
        raise ValueError("zero is not simple")
    return 2j * kappa / dW


def negated_residue_form(kappa: complex) -> complex:
    """Reference residue formula for the unit barrier with kappa-consistent roots (equals minus the residue)."""
    k = complex(kappa)
    p = 1j * k * k
    q = complex(shifted_root(k, 1.0))
    si = np.exp(0.25j * np.pi)
    rp, rip = si * k, si * q
    num = rp * (1j + p) * (1j + 2 * p - 2 * rp * rip)
    den = np.exp(-0.25j * np.pi) * np.exp(-2 * k + 2 * q) * (1 + k)
    return num / den


def interior_coefficient_A3(kappa: complex) -> complex:
    """Coefficient of exp(q x) in y+ on (-1, 1) for the unit barrier."""
    k = complex(kappa)
    q = complex(shifted_root(k, 1.0))
    return (q - k) / (2 * q) * np.exp(-k - q)


def jost_plus_closed_form(sq: SquareProblem, kappa: complex, x):
    """y+ for V = a on [-1, 1], matched at x = 1 (valid for -1 <= x <= 1 and x >= 1)."""
    k = complex(kappa)
    q = complex(shifted_root(k, sq.a))
    x = np.asarray(x, dtype=float)
    inside = np.exp(-k) * (np.cosh(q * (1 - x)) + k * np.sinh(q * (1 - x)) / q)
    return np.where(x >= 1, np.exp(-k * x), inside)
