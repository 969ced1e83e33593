import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gamowexp.problem import ProblemError, build_problem, eval_initial, eval_potential, load_problem, square_barrier
from gamowexp.spectrum import refine_resonance

P0 = complex(-1.70018, -0.805871)


def natural_spline(x, y, xq):
    """Textbook natural cubic spline through (x, y), evaluated at xq."""
    n = len(x) - 1
    h = np.diff(x)
    A = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    A[0, 0] = A[n, n] = 1.0
    for i in range(1, n):
        A[i, i - 1], A[i, i], A[i, i + 1] = h[i - 1], 2 * (h[i - 1] + h[i]), h[i]
        rhs[i] = 6 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1])
    m = np.linalg.solve(A, rhs)
    i = np.clip(np.searchsorted(x, xq) - 1, 0, n - 1)
    a, b = x[i + 1] - xq, xq - x[i]
    return (m[i] * a ** 3 + m[i + 1] * b ** 3) / (6 * h[i]) + (y[i] / h[i] - m[i] * h[i] / 6) * a \
        + (y[i + 1] / h[i] - m[i + 1] * h[i] / 6) * b


def test_barrier_needs_no_rescaling(barrier):
    assert barrier.scaling.center == 0.0 and barrier.scaling.half_width == 1.0
    assert barrier.potential.support == (-1.0, 1.0)
    assert not barrier.free


def test_zero_potential_is_flagged_free():
    prob = build_problem({"potential": {"kind": "square-step", "support": [-1, 1], "height": 0.0},
                          "initial": {"kind": "square-step", "support": [-0.5, 0.5]}})
    assert prob.free
    assert prob.potential.kind == "zero"


def test_wide_barrier_scales_poles_by_inverse_square():
    # height 1/9 on [-3, 3] is the unit barrier after x -> x/3, so p_user = p_norm / 9
    wide = build_problem({"potential": {"kind": "square-step", "support": [-3, 3], "height": 1 / 9},
                          "initial": {"kind": "square-step", "support": [-1.5, 1.5]}})
    assert wide.scaling.half_width == 3.0
    assert wide.scaling.x_scale == pytest.approx(1 / 3)
    assert wide.scaling.p_scale == pytest.approx(1 / 9)
    unit = square_barrier(1.0)
    seed = complex(-3.6, -2.5)
    pw, pu = refine_resonance(wide, seed, 1).p, refine_resonance(unit, seed, 1).p
    assert abs(pw - pu) < 1e-10
    assert abs(pw * wide.scaling.p_scale * 9 - P0) < 1e-4


@pytest.mark.parametrize("spec, match", [
    ({"potential": {"kind": "square-step", "support": [1, 1]}, "initial": {"kind": "square-step", "support": [0, 1]}},
     "empty support"),
    ({"potential": {"kind": "square-step", "support": [-1, 1], "height": float("inf")},
      "initial": {"kind": "square-step", "support": [0, 1]}}, "non-finite"),
    ({"potential": {"kind": "sampled-with-spline", "x": [-1, 0, 1], "values": [0, 1, 0]},
      "initial": {"kind": "square-step", "support": [0, 1]}}, "at least 4"),
    ({"potential": {"kind": "piecewise-polynomial", "breaks": [-1, 0, 1], "coefficients": [[1], [2]]},
      "initial": {"kind": "square-step", "support": [0, 1]}}, "interior jump"),
    ({"potential": {"kind": "square-step", "support": [-1, 1]}}, "initial"),
    ({"potential": {"kind": "wedge", "support": [-1, 1]}, "initial": {"kind": "square-step", "support": [0, 1]}},
     "unknown kind"),
])
def test_build_rejects_bad_input(spec, match):
    with pytest.raises(ProblemError, match=match):
        build_problem(spec)


def test_eval_potential_examples(barrier):
    assert eval_potential(barrier, 0.0) == 1.0
    assert eval_potential(barrier, 2.0) == 0.0
    assert eval_potential(barrier, 0.3, 1) == 0.0
    with pytest.raises(ValueError):
        eval_potential(barrier, 0.0, 3)


def test_spline_well_matches_independent_spline():
    xs = np.array([-1.0, -0.5, 0.0, 0.4, 1.0])
    vs = np.array([0.0, -1.5, -2.0, -1.2, 0.0])
    prob = build_problem({"potential": {"kind": "sampled-with-spline", "x": xs.tolist(), "values": vs.tolist()},
                          "initial": {"kind": "square-step", "support": [-0.5, 0.5]}})
    xq = np.array([-0.75, -0.25, 0.2, 0.7])
    assert np.allclose(eval_potential(prob, xq), natural_spline(xs, vs, xq), rtol=0, atol=1e-13)


def test_eval_initial_examples(barrier):
    assert eval_initial(barrier, 0.0) == 1.0
    assert eval_initial(barrier, 0.75) == 0.0


def test_gaussian_cutoff_closed_form():
    spec = {"potential": {"kind": "square-step", "support": [-1, 1], "height": 1.0},
            "initial": {"kind": "gaussian-cutoff", "support": [-0.8, 0.8], "center": 0.1, "width": 0.2,
                        "momentum": 3.0, "amplitude": 1.0}}
    prob = build_problem(spec)
    x = 0.1
    expected = np.exp(1j * 3.0 * x) * (1 - (x / 0.8) ** 2) ** 3
    assert abs(eval_initial(prob, x) - expected) < 1e-14
    assert eval_initial(prob, 0.9) == 0


def test_scaling_round_trip():
    prob = build_problem({"potential": {"kind": "square-step", "support": [2, 7], "height": 1.0},
                          "initial": {"kind": "square-step", "support": [3, 4]}})
    y = np.linspace(-5, 12, 23)
    assert np.allclose(prob.scaling.to_user(prob.scaling.to_normalized(y)), y, rtol=0, atol=1e-13)
    assert prob.potential.support == (-1.0, 1.0)


def test_load_problem_from_json(tmp_path):
    spec = {"potential": {"kind": "square-step", "support": [-1, 1], "height": 1.0},
            "initial": {"kind": "square-step", "support": [-0.5, 0.5]}}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(spec))
    prob = load_problem(str(path))
    assert prob.hash == build_problem(spec).hash


potential_specs = st.one_of(
    st.builds(lambda lo, w, h: {"kind": "square-step", "support": [lo, lo + w], "height": h},
              st.floats(-5, 5), st.floats(0.1, 6), st.floats(-5, 5)),
    st.builds(lambda lo, w, c0, c1: {"kind": "piecewise-polynomial", "breaks": [lo, lo + w],
                                     "coefficients": [[c0, c1, -c1]]},
              st.floats(-5, 5), st.floats(0.1, 6), st.floats(-3, 3), st.floats(-3, 3)),
)


@settings(max_examples=60, deadline=None)
@given(potential_specs, st.floats(1.0001, 10.0))
def test_potential_vanishes_outside_unit_interval(pot, xabs):
    prob = build_problem({"potential": pot, "initial": {"kind": "square-step", "support": [-0.1, 0.1]}})
    assert eval_potential(prob, xabs) == 0.0
    assert eval_potential(prob, -xabs) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-4.0, 4.0))
def test_rescaled_copies_share_normalized_potential(s, c):
    xs = np.array([-1.0, -0.3, 0.2, 0.6, 1.0])
    vs = np.array([0.5, 2.0, -1.0, 0.7, 1.5])
    a = build_problem({"potential": {"kind": "sampled-with-spline", "x": xs.tolist(), "values": vs.tolist()},
                       "initial": {"kind": "square-step", "support": [-0.5, 0.5]}})
    b = build_problem({"potential": {"kind": "sampled-with-spline", "x": (c + s * xs).tolist(),
                                     "values": (vs / s ** 2).tolist()},
                       "initial": {"kind": "square-step", "support": [c - 0.5 * s, c + 0.5 * s]}})
    grid = np.linspace(-1.2, 1.2, 97)
    assert np.max(np.abs(eval_potential(a, grid) - eval_potential(b, grid))) < 1e-12
