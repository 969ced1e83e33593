"""Command-line entry point: resonances, evolve, validate, report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .problem import FIXTURES, Problem, ProblemError, fixture, load_problem

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    problem: Problem
    out: str | None = None
    fmt: str = "csv"
    mode: str = "theorem1"
    M: float = 10.0
    k_max: int | None = None
    xgrid: np.ndarray = field(default_factory=lambda: np.array([3.0]))
    tgrid: np.ndarray = field(default_factory=lambda: np.array([10.0]))
    tol: float = 1e-8
    verbose: bool = False
    tolerances: dict = field(default_factory=dict)


def parse_grid(text: str, what: str) -> np.ndarray:
    """'a:b:n' -> n points from a to b, or a comma list / single value."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise InputError(f"{what}: need at least one point")
            g = np.linspace(a, b, n) if n > 1 else np.array([a])
        else:
            g = np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise InputError(f"{what}: cannot parse {text!r} ({e})") from None
    if g.size > 1 and not np.all(np.diff(g) > 0):
        raise InputError(f"{what}: grid must be increasing")
    return g


def fmt17(v) -> str:
    return f"{v:.17g}"


def header_lines(prob: Problem, extra: dict | None = None) -> list[str]:
    lines = [f"# gamowexp {__version__}", f"# problem {prob.name or '-'} hash {prob.hash}",
             "# scaling " + " ".join(f"{k}={fmt17(v)}" for k, v in sorted(prob.scaling.as_dict().items()))]
    for k, v in sorted((extra or {}).items()):
        lines.append(f"# {k} {v}")
    return lines


def write_table(rows: list[dict], columns: list[str], prob: Problem, fmt: str, out: str | None,
                extra: dict | None = None, meta: dict | None = None) -> None:
    if fmt == "json":
        doc = {"version": __version__, "problem": prob.name, "hash": prob.hash,
               "scaling": prob.scaling.as_dict(), "columns": columns, "rows": rows}
        doc.update(meta or {})
        doc.update({k: v for k, v in (extra or {}).items()})
        text = json.dumps(doc, sort_keys=True, indent=1, default=_jsonable) + "\n"
    else:
        buf = io.StringIO()
        for line in header_lines(prob, extra):
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt17(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
        text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_resonances(cfg: RunConfig) -> int:
    from .spectrum import log_coefficient, pole_scaling_check, resonance_rows, search_spectrum, CSV_COLUMNS
    prob = cfg.problem
    ps = prob.scaling.p_scale
    if prob.free:
        print("warning: no resonances (zero potential)", file=sys.stderr)
        write_table([], CSV_COLUMNS, prob, cfg.fmt, cfg.out)
        return EXIT_OK
    k_max = cfg.k_max if cfg.k_max is not None else (None if cfg.M else 20)
    search = search_spectrum(prob, M=None if cfg.k_max is not None else cfg.M / ps, k_max=k_max)
    rows = resonance_rows(search.resonances, ps)
    extra = {"complete": f"{search.complete} (argument principle {search.counted} of {search.expected})",
             "bound_states": " ".join(fmt17(b.E * ps) for b in search.bound) or "none"}
    firsts = search.by_sheet("first")
    if len(firsts) >= 8:
        fit = pole_scaling_check(firsts, log_coefficient(prob))
        extra["fit"] = (f"Im_k2_ratio={fmt17(fit.A_ratio)} log_coefficient_ratio={fmt17(fit.c_ratio)} "
                        f"misfit_im={fmt17(fit.misfit_im)} misfit_re={fmt17(fit.misfit_re)}")
    if not rows:
        print("warning: no resonances", file=sys.stderr)
    if cfg.verbose:
        for n in search.notes:
            print(n, file=sys.stderr)
    write_table(rows, CSV_COLUMNS, prob, cfg.fmt, cfg.out, extra)
    return EXIT_OK


EVOLVE_COLUMNS = ["x", "t", "re_psi", "im_psi", "err_est", "n_star", "gamow_terms_used", "resonance_share"]


def cmd_evolve(cfg: RunConfig) -> int:
    from .expansion import evaluate_wavefunction
    prob = cfg.problem
    if np.any(cfg.tgrid <= 0):
        raise InputError("t-grid must lie in (0, inf)")
    sc = prob.scaling
    rows = []
    deltas = []
    mode = "oracle-cross" if cfg.mode == "oracle" else cfg.mode
    for x in cfg.xgrid:
        for t in cfg.tgrid:
            xn, tn = float(sc.to_normalized(x)), float(t * sc.t_scale)
            rep = evaluate_wavefunction(prob, xn, tn, mode=mode, M=cfg.M / sc.p_scale, k_max=cfg.k_max)
            value = rep.value
            err = rep.error_estimate
            if mode == "oracle-cross":
                deltas.append(abs(rep.value - rep.oracle_value))
                value, err = rep.oracle_value, abs(rep.value - rep.oracle_value)
            share = abs(rep.gamow_terms[0]) / abs(rep.dispersive + rep.eterms) if rep.gamow_terms else 0.0
            rows.append({"x": float(x), "t": float(t), "re_psi": value.real, "im_psi": value.imag,
                         "err_est": float(err), "n_star": rep.n_star, "gamow_terms_used": len(rep.gamow_terms),
                         "resonance_share": float(share)})
    extra = {"mode": cfg.mode, "M": fmt17(cfg.M)}
    if deltas:
        extra["max_delta_vs_theorem1"] = fmt17(max(deltas))
        print(f"max |theorem1 - bromwich| = {max(deltas):.3e}", file=sys.stderr)
    write_table(rows, EVOLVE_COLUMNS, prob, cfg.fmt, cfg.out, extra)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    from .validation import run_checks
    report = run_checks(cfg.problem, cfg.tolerances)
    text = json.dumps(report, sort_keys=True, indent=1, default=_jsonable) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def cmd_report(cfg: RunConfig) -> int:
    from .report import render_report
    outdir = cfg.out or "report"
    files = render_report(cfg.problem, outdir, cfg.xgrid, cfg.tgrid, cfg.M, cfg.k_max)
    for f in files:
        print(f)
    return EXIT_OK


COMMANDS = {"resonances": cmd_resonances, "evolve": cmd_evolve, "validate": cmd_validate, "report": cmd_report}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gamowexp", description="Resonance expansions for 1D Schroedinger evolution.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--problem", metavar="PATH", help="JSON problem file")
    src.add_argument("--fixture", choices=sorted(FIXTURES), help="built-in problem")
    common.add_argument("--out", metavar="PATH", help="output file (directory for report)")
    common.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")
    common.add_argument("--M", type=float, default=10.0, help="spectral cutoff |p| <= M")
    common.add_argument("--kmax", type=int, default=None, help="number of resonances")
    common.add_argument("--xgrid", default="3", help="a:b:n or comma list")
    common.add_argument("--tgrid", default="10", help="a:b:n or comma list")
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--tolerances", metavar="PATH", help="JSON overrides for validate")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("resonances", parents=[common], help="bound states and resonances")
    ev = sub.add_parser("evolve", parents=[common], help="psi(x, t) on a grid")
    ev.add_argument("--mode", choices=["theorem1", "approx2", "oracle"], default="theorem1")
    sub.add_parser("validate", parents=[common], help="cross-oracle and invariant checks")
    sub.add_parser("report", parents=[common], help="figures for a problem")
    return ap


def make_config(args) -> RunConfig:
    if args.problem:
        try:
            prob = load_problem(args.problem)
        except json.JSONDecodeError as e:
            raise InputError(f"{args.problem}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
        except OSError as e:
            raise InputError(f"{args.problem}: {e.strerror}") from None
    else:
        prob = fixture(args.fixture or "paper-square-barrier")
    if args.tol <= 0:
        raise InputError("--tol must be positive")
    if args.M < 0:
        raise InputError("--M must be non-negative")
    if args.kmax is not None and args.kmax < 1:
        raise InputError("--kmax must be at least 1")
    tolerances = {}
    if args.tolerances:
        try:
            with open(args.tolerances) as fh:
                tolerances = json.load(fh)
        except json.JSONDecodeError as e:
            raise InputError(f"{args.tolerances}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
        except OSError as e:
            raise InputError(f"{args.tolerances}: {e.strerror}") from None
        if not isinstance(tolerances, dict) or any(not isinstance(v, (int, float)) or v <= 0
                                                    for v in tolerances.values()):
            raise InputError("tolerances must map check names to positive numbers")
    return RunConfig(args.subcommand, prob, args.out, args.fmt, getattr(args, "mode", "theorem1"), args.M,
                     args.kmax, parse_grid(args.xgrid, "--xgrid"), parse_grid(args.tgrid, "--tgrid"), args.tol,
                     args.verbose, tolerances)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        if cfg.subcommand == "evolve" and np.any(cfg.tgrid <= 0):
            raise InputError("t-grid must lie in (0, inf)")
        with warnings.catch_warnings():
            if not cfg.verbose:
                warnings.simplefilter("ignore")
            return COMMANDS[cfg.subcommand](cfg)
    except (InputError, ProblemError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
