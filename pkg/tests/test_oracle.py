import numpy as np
import pytest
from scipy.special import fresnel

from gamowexp.expansion import bound_coefficient, dispersive_series, gamow_mode, jost_plus
from gamowexp.problem import build_problem
from gamowexp.oracle import (BoundaryReached, ContourSpec, PoleNearCut, branch_cut_integral, bromwich_invert,
                             cn_propagate, free_evolution)
from gamowexp.spectrum import eigenfunction_values


def step(lo, hi, height=1.0, V=1.0):
    return build_problem({"potential": {"kind": "square-step", "support": [-1, 1], "height": V},
                          "initial": {"kind": "square-step", "support": [lo, hi], "height": height}})


def smooth_free():
    return build_problem({"potential": {"kind": "square-step", "support": [-1, 1], "height": 0.0},
                          "initial": {"kind": "gaussian-cutoff", "support": [-0.8, 0.8], "center": 0.0,
                                      "width": 0.2, "momentum": 2.0, "amplitude": 1.0}})


def fresnel_step(x, t, lo=-0.5, hi=0.5):
    """(4 pi i t)^(-1/2) int_lo^hi exp(i (x - s)^2 / 4t) ds through Fresnel integrals."""
    k = np.sqrt(2 * np.pi * t)
    S1, C1 = fresnel((hi - x) / k)
    S0, C0 = fresnel((lo - x) / k)
    return (4j * np.pi * t) ** -0.5 * k * ((C1 - C0) + 1j * (S1 - S0))


def test_free_evolution_closed_form(free):
    for x in (0.0, 0.5, 0.7, 3.0):
        for t in (0.1, 1.0, 10.0):
            assert abs(free_evolution(free, [x], t)[0] - fresnel_step(x, t)) < 1e-13


def test_bromwich_on_free_problem(free):
    for x, t in ((0.0, 1.0), (2.0, 3.0), (6.0, 10.0)):
        assert abs(bromwich_invert(free, x, t) - fresnel_step(x, t)) < 1e-8


def test_bromwich_at_short_times(free, barrier):
    assert abs(bromwich_invert(free, 0.0, 1e-2) - fresnel_step(0.0, 1e-2)) < 1e-8
    # far from the potential edges the barrier only contributes its phase
    assert abs(bromwich_invert(barrier, 0.0, 1e-3) - np.exp(-1e-3j) * fresnel_step(0.0, 1e-3)) < 1e-5


def test_bromwich_is_linear_in_initial_state():
    x, t = 2.0, 3.0
    whole = bromwich_invert(step(-0.5, 0.5), x, t)
    parts = bromwich_invert(step(-0.5, 0.0), x, t) + bromwich_invert(step(0.0, 0.5), x, t)
    assert abs(whole - parts) < 1e-9
    assert abs(bromwich_invert(step(-0.5, 0.5, height=2.0), x, t) - 2 * whole) < 1e-9


def test_bromwich_agrees_with_crank_nicolson(barrier):
    cn = cn_propagate(barrier, 1.0, x=[0.0])
    assert abs(cn.psi[0] - bromwich_invert(barrier, 0.0, 1.0)) < 1e-6


def test_crank_nicolson_barrier_outside(barrier):
    cn = cn_propagate(barrier, 8.0, x=[3.0])
    assert abs(cn.psi[0] - bromwich_invert(barrier, 3.0, 8.0)) < 1e-5


def two_route_gap(prob, search, x, t):
    firsts = search.by_sheet("first")
    b = bromwich_invert(prob, x, t)
    g = sum(gamow_mode(prob, r).g * jost_plus(prob, r.kval, [x])[0] * np.exp(r.p * t) for r in firsts)
    bs = sum(bound_coefficient(prob, q) * eigenfunction_values(prob, q, [x])[0] * np.exp(-1j * q.E * t)
             for q in search.bound)
    return abs(b - branch_cut_integral(prob, x, t) - g - bs)


@pytest.mark.parametrize("x, t", [(1.0, 2.0), (3.0, 5.0), (8.0, 15.0)])
def test_two_route_identity(barrier, barrier_search, well, well_search, x, t):
    assert two_route_gap(barrier, barrier_search, x, t) < 1e-7
    assert two_route_gap(well, well_search, x, t) < 1e-7


def test_branch_cut_leading_power(barrier):
    c1 = dispersive_series(barrier, 3.0, J=11).coefficients[0]
    gaps = [abs(branch_cut_integral(barrier, 3.0, t) * t ** 1.5 / c1 - 1) for t in (50.0, 100.0, 200.0)]
    # the next term is down by 1/t
    assert gaps[2] < 0.015
    assert gaps[1] / gaps[2] == pytest.approx(2.0, rel=0.05)


def test_pole_near_cut_is_refused(barrier):
    p = -1 + 1e-5j
    k = np.sqrt(-1j * p)
    assert abs(1j * k * k - p) < 1e-12
    with pytest.raises(PoleNearCut) as exc:
        branch_cut_integral(barrier, 2.0, 3.0, poles=[k])
    assert exc.value.pole == k


def test_crank_nicolson_free_subtraction_is_exact(free):
    cn = cn_propagate(free, 2.0, dx=1e-3, x=[0.3, 2.0])
    assert np.max(np.abs(cn.psi - free_evolution(free, [0.3, 2.0], 2.0))) < 1e-6


def test_crank_nicolson_transparent_boundary_on_smooth_data():
    prob = smooth_free()
    xs = [0.0, 1.0, 2.5]
    exact = free_evolution(prob, xs, 1.0)
    coarse = np.abs(cn_propagate(prob, 1.0, dx=4e-3, subtract_free=False, x=xs).psi - exact)
    fine = np.abs(cn_propagate(prob, 1.0, dx=2e-3, subtract_free=False, x=xs).psi - exact)
    assert np.max(fine) < 1e-6
    assert np.all(coarse / fine > 3.0)


def test_dirichlet_norm_conservation(barrier):
    cn = cn_propagate(barrier, 0.5, dx=5e-3, dt=0.5e-4, L=10.0, boundary="dirichlet", subtract_free=False,
                      richardson=False, check_walls=False)
    assert cn.steps == 10000
    assert cn.norm_drift < 1e-10


def test_dirichlet_walls_are_checked(barrier):
    with pytest.raises(BoundaryReached):
        cn_propagate(barrier, 20.0, boundary="dirichlet", L=4.0, dx=5e-3)


@pytest.mark.parametrize("call", [
    lambda p: ContourSpec(nodes=8),
    lambda p: ContourSpec(kind="keyhole"),
    lambda p: bromwich_invert(p, 1.0, 1.0, spec=ContourSpec(kind="deformed-wraparound")),
    lambda p: bromwich_invert(p, 1.0, 0.0),
    lambda p: branch_cut_integral(p, 1.0, -1.0),
    lambda p: cn_propagate(p, 0.0),
    lambda p: cn_propagate(p, 1.0, boundary="periodic"),
    lambda p: free_evolution(p, [0.0], 0.0),
])
def test_bad_input(barrier, call):
    with pytest.raises(ValueError):
        call(barrier)
