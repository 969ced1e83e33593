import csv
import io
import json
import shutil
import subprocess

import numpy as np
import pytest

from gamowexp import __version__
from gamowexp.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, main, parse_grid
from gamowexp.problem import fixture


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_resonance_csv(capsys):
    code, out, _ = run(capsys, "resonances", "--fixture", "paper-square-barrier", "--kmax", "3")
    assert code == EXIT_OK
    head = [line for line in out.splitlines() if line.startswith("#")]
    prob = fixture("paper-square-barrier")
    assert head[0] == f"# gamowexp {__version__}"
    assert prob.hash in head[1]
    assert head[2].startswith("# scaling ") and "half_width=1" in head[2]
    rows = table(out)
    first = [r for r in rows if r["sheet"] == "first"]
    assert float(first[0]["re_p"]) == pytest.approx(-1.70018, abs=1e-4)
    assert float(first[0]["im_p"]) == pytest.approx(-0.805871, abs=1e-4)


def test_resonances_are_reported_in_user_units(capsys, tmp_path):
    spec = {"potential": {"kind": "square-step", "support": [-3, 3], "height": 1 / 9},
            "initial": {"kind": "square-step", "support": [-1.5, 1.5]}}
    path = tmp_path / "wide.json"
    path.write_text(json.dumps(spec))
    code, out, _ = run(capsys, "resonances", "--problem", str(path), "--kmax", "1")
    assert code == EXIT_OK
    first = [r for r in table(out) if r["sheet"] == "first"][0]
    assert complex(float(first["re_p"]), float(first["im_p"])) * 9 == pytest.approx(complex(-1.70018, -0.805871),
                                                                                    abs=1e-3)


def test_free_resonances_warn(capsys):
    code, out, err = run(capsys, "resonances", "--fixture", "free")
    assert code == EXIT_OK
    assert "no resonances" in err
    assert table(out) == []


def test_evolve_json_is_sorted_and_stable(capsys):
    argv = ["evolve", "--fixture", "free", "--xgrid", "0,2", "--tgrid", "1:5:3", "--format", "json"]
    code, first, _ = run(capsys, *argv)
    assert code == EXIT_OK
    _, second, _ = run(capsys, *argv)
    assert first == second
    doc = json.loads(first)
    assert list(doc) == sorted(doc)
    assert len(doc["rows"]) == 6
    assert doc["columns"][:4] == ["x", "t", "re_psi", "im_psi"]


def test_evolve_oracle_mode(capsys):
    code, out, err = run(capsys, "evolve", "--fixture", "paper-square-barrier", "--mode", "oracle",
                         "--xgrid", "3", "--tgrid", "5")
    assert code == EXIT_OK
    assert "max |theorem1 - bromwich|" in err
    row = table(out)[0]
    assert float(row["err_est"]) < 1e-6


def test_evolve_writes_file(capsys, tmp_path):
    out = tmp_path / "psi.csv"
    code, stdout, _ = run(capsys, "evolve", "--fixture", "free", "--tgrid", "2", "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    assert len(table(out.read_text())) == 1


@pytest.mark.parametrize("argv", [
    ["evolve", "--fixture", "free", "--tgrid", "0"],
    ["evolve", "--fixture", "free", "--tgrid=-1,2"],
    ["evolve", "--fixture", "free", "--xgrid", "3,1"],
    ["evolve", "--fixture", "free", "--tol", "0"],
    ["resonances", "--fixture", "paper-square-barrier", "--kmax", "0"],
    ["resonances", "--problem", "/nonexistent/problem.json"],
])
def test_input_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INPUT
    assert err.startswith("error:")


def test_malformed_json_reports_position(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"potential": {"kind": "square-step",\n "support": [-1, 1],,}}')
    code, _, err = run(capsys, "resonances", "--problem", str(path))
    assert code == EXIT_INPUT
    assert "line 2" in err and "column" in err


def test_invalid_problem_is_an_input_error(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"potential": {"kind": "square-step", "support": [1, 1]},
                                "initial": {"kind": "square-step", "support": [0, 1]}}))
    code, _, err = run(capsys, "resonances", "--problem", str(path))
    assert code == EXIT_INPUT and "support" in err


def test_numeric_failure_exit_code(capsys, monkeypatch):
    from gamowexp import spectrum

    def broken(*a, **k):
        raise spectrum.NoConvergence("forced")

    monkeypatch.setattr(spectrum, "search_spectrum", broken)
    code, _, err = run(capsys, "resonances", "--fixture", "paper-square-barrier", "--kmax", "2")
    assert code == EXIT_NUMERIC
    assert "NoConvergence" in err


def test_validate_well_passes(capsys):
    code, out, _ = run(capsys, "validate", "--fixture", "square-well")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["passed"]
    names = [c["name"] for c in doc["checks"]]
    assert names == sorted(names)
    assert all(c["margin"] >= 0 for c in doc["checks"])


def test_validate_tolerance_overrides(capsys, tmp_path):
    tight = tmp_path / "tight.json"
    tight.write_text(json.dumps({"two_route_identity": 1e-30}))
    code, out, _ = run(capsys, "validate", "--fixture", "square-well", "--tolerances", str(tight))
    assert code == EXIT_VALIDATION
    check = {c["name"]: c for c in json.loads(out)["checks"]}["two_route_identity"]
    assert not check["pass"] and check["margin"] < 0 and check["tolerance"] == 1e-30
    loose = tmp_path / "loose.json"
    loose.write_text(json.dumps({"two_route_identity": 1e-3}))
    code, out, _ = run(capsys, "validate", "--fixture", "square-well", "--tolerances", str(loose))
    assert code == EXIT_OK
    check = {c["name"]: c for c in json.loads(out)["checks"]}["two_route_identity"]
    assert check["margin"] == pytest.approx(1e-3 - check["value"])


def test_bad_tolerance_file(capsys, tmp_path):
    path = tmp_path / "tol.json"
    path.write_text(json.dumps({"two_route_identity": -1}))
    code, _, _ = run(capsys, "validate", "--fixture", "square-well", "--tolerances", str(path))
    assert code == EXIT_INPUT


def test_grid_parsing():
    assert np.allclose(parse_grid("1:3:5", "g"), [1, 1.5, 2, 2.5, 3])
    assert np.allclose(parse_grid("2", "g"), [2])
    assert np.allclose(parse_grid("1,4", "g"), [1, 4])


def test_console_script_version():
    exe = shutil.which("gamowexp")
    assert exe is not None
    res = subprocess.run([exe, "--version"], capture_output=True, text=True, check=True)
    assert __version__ in res.stdout


def test_report_renders_figures(capsys, tmp_path):
    outdir = tmp_path / "figs"
    code, out, _ = run(capsys, "report", "--fixture", "square-well", "--xgrid", "3", "--tgrid", "2:12:6",
                       "--out", str(outdir))
    assert code == EXIT_OK
    names = sorted(p.name for p in outdir.iterdir())
    assert names == ["evolution.png", "oracle_error.png", "resonances.png", "series.png"]
    assert all((outdir / n).stat().st_size > 1000 for n in names)
    assert len(out.splitlines()) == 4
