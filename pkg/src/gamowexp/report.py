"""Figures for a problem: pole ladder, decomposition in time, series growth, oracle error."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .problem import Problem  # noqa: E402

SHEET_STYLE = {"first": ("C0", "o"), "mirror": ("C1", "s"), "second": ("C2", "^"),
               "physical": ("C3", "D"), "boundary": ("C7", "x")}


def _save(fig, outdir, name):
    path = os.path.join(outdir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_resonances(prob: Problem, outdir: str, k_max: int = 20) -> str:
    from .spectrum import asymptotic_seeds, search_spectrum
    search = search_spectrum(prob, k_max=k_max)
    ps = prob.scaling.p_scale
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    for sheet, (col, mk) in SHEET_STYLE.items():
        pts = [r.p * ps for r in search.resonances if r.sheet == sheet]
        if pts:
            ax.plot(np.real(pts), np.imag(pts), mk, color=col, ms=4, label=sheet)
    if search.bound:
        ax.plot([0] * len(search.bound), [-b.E * ps for b in search.bound], "*", color="C3", ms=8, label="bound")
    seeds = np.array(asymptotic_seeds(prob, range(1, k_max + 1))) * ps
    ax.plot(seeds.real, seeds.imag, "+", color="k", ms=5, label="large-k law")
    ax.axhline(0, color="0.7", lw=0.5)
    ax.axvline(0, color="0.7", lw=0.5)
    ax.set_xlabel("Re p")
    ax.set_ylabel("Im p")
    ax.legend(fontsize=7)
    return _save(fig, outdir, "resonances.png")


def plot_evolution(prob: Problem, outdir: str, x: float, ts: np.ndarray, M: float) -> str:
    from .expansion import evaluate_wavefunction
    sc = prob.scaling
    xn = float(sc.to_normalized(x))
    rows = []
    for t in ts:
        rep = evaluate_wavefunction(prob, xn, float(t * sc.t_scale), mode="theorem1", M=M / sc.p_scale)
        rows.append((abs(rep.value), abs(rep.dispersive + rep.eterms), abs(rep.gamow), abs(rep.bound)))
    rows = np.array(rows)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogy(ts, rows[:, 0], "k-", label="|psi|")
    ax.semilogy(ts, rows[:, 1], "C0--", label="dispersive")
    if np.any(rows[:, 2] > 0):
        ax.semilogy(ts, np.maximum(rows[:, 2], 1e-300), "C1-.", label="Gamow sum")
    if np.any(rows[:, 3] > 0):
        ax.semilogy(ts, rows[:, 3], "C3:", label="bound states")
    ax.set_xlabel("t")
    ax.set_title(f"x = {x:g}")
    ax.legend(fontsize=7)
    return _save(fig, outdir, "evolution.png")


def plot_series(prob: Problem, outdir: str, x: float) -> str:
    from .expansion import dispersive_series
    ser = dispersive_series(prob, float(prob.scaling.to_normalized(x)), J=61)
    n = np.arange(1, ser.coefficients.size + 1)
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogy(ser.powers, np.abs(ser.coefficients), "o", ms=3, label="|c_n|")
    ax2 = ax.twinx()
    ax2.plot(ser.powers, np.abs(ser.coefficients) ** (1 / n) / n, "C1.", ms=3)
    ax2.set_ylabel("|c_n|^(1/n) / n", color="C1")
    ax.set_xlabel("power of 1/t")
    ax.set_title(f"dispersive series at x = {x:g}")
    return _save(fig, outdir, "series.png")


def plot_oracle_error(prob: Problem, outdir: str, x: float, ts: np.ndarray, k_max: int | None) -> str:
    from .expansion import evaluate_wavefunction
    from .oracle import bromwich_invert
    sc = prob.scaling
    xn = float(sc.to_normalized(x))
    errs = []
    for t in ts:
        tn = float(t * sc.t_scale)
        rep = evaluate_wavefunction(prob, xn, tn, mode="theorem1", M=0.0, k_max=k_max or 8)
        errs.append(max(abs(rep.value - bromwich_invert(prob, xn, tn)), 1e-17))
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogy(ts, errs, "o-", ms=4)
    ax.set_xlabel("t")
    ax.set_ylabel("|least-term expansion - Bromwich|")
    ax.set_title(f"x = {x:g}")
    return _save(fig, outdir, "oracle_error.png")


def render_report(prob: Problem, outdir: str, xgrid, tgrid, M: float = 10.0, k_max: int | None = None) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    x = float(np.asarray(xgrid)[0])
    ts = np.asarray(tgrid, dtype=float)
    if ts.size < 4:
        ts = np.linspace(1.0, 20.0, 40)
    files = []
    if not prob.free:
        files.append(plot_resonances(prob, outdir, k_max or 20))
    files.append(plot_evolution(prob, outdir, x, ts, M))
    files.append(plot_series(prob, outdir, x))
    files.append(plot_oracle_error(prob, outdir, x, np.linspace(max(2.0, ts[0]), min(20.0, ts[-1]), 6), k_max))
    return files
