import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gravvortex import (Divisor, NoSolutionExists, VortexProblem, bradlow_gate, build_section,
                        formal_section, integrate, laplacian, make_sphere_grid, make_torus_grid,
                        solve_vortex)
from gravvortex.geometry import resample
from gravvortex.newton import damped_newton
from gravvortex.errors import ConvergenceFailure
from gravvortex.vortex import flux_identity_check


def _problem(grid, N, factor, points=None):
    pts = points or tuple(complex(0.17 * k + 0.05, 0.23 * k + 0.11) for k in range(N))
    sec = build_section(Divisor(pts, (1,) * N), grid)
    return VortexProblem(grid, sec, factor * 4 * math.pi * N / grid.volume)


def test_gate_is_strict():
    assert bradlow_gate(1, 2.0 + 1e-12, 2 * math.pi)
    assert not bradlow_gate(1, 2.0, 2 * math.pi)
    assert not bradlow_gate(2, 1.0, 2 * math.pi)


def test_boundary_rejected_with_values(sphere16):
    sec = build_section(Divisor((0j,), (1,)), sphere16)
    with pytest.raises(NoSolutionExists) as info:
        solve_vortex(VortexProblem(sphere16, sec, 2.0))
    assert "12.5663706144" in str(info.value)


def test_formal_constant_solution_torus(torus16):
    # constant |phi|^2 = 0.3 with declared degree 1: f = log((tau - 4 pi N / Vol) / 0.3) / 2
    tau = 20.0
    prob = VortexProblem(torus16, formal_section(torus16, 0.3, 1), tau)
    sol = solve_vortex(prob)
    exact = 0.5 * math.log((tau - 4 * math.pi) / 0.3)
    assert np.abs(sol.f.values - exact).max() < 1e-12
    assert sol.flux_defect < 1e-12


@pytest.mark.parametrize("which", ["sphere", "torus"])
@pytest.mark.parametrize("N", [1, 2])
def test_converges_with_flux_identity(which, N, sphere16, torus24):
    grid = sphere16 if which == "sphere" else torus24
    prob = _problem(grid, N, 2.0)
    sol = solve_vortex(prob)
    assert sol.residual_norm < 1e-10
    assert sol.flux_defect < 1e-7
    # integrating the equation: the constant mode of the residual is the flux defect
    lap = laplacian(sol.f, grid)
    rhs = lap + 0.5 * (np.exp(2 * sol.f.values) * prob.section.density.values - prob.tau)
    assert abs(integrate(rhs, grid) + 2 * math.pi * N) < 1e-7


def test_uniqueness_from_two_starts(sphere16):
    prob = _problem(sphere16, 2, 1.2)
    a = solve_vortex(prob)
    b = solve_vortex(prob, "zero")
    assert np.abs(a.f.values - b.f.values).max() < 1e-8


def test_scale_covariance(torus24):
    prob = _problem(torus24, 1, 2.0)
    base = solve_vortex(prob)
    for s in (0.25, 7.0):
        scaled = VortexProblem(torus24, prob.section.scaled(s), prob.tau)
        sol = solve_vortex(scaled)
        assert np.abs(sol.f.values - base.f.values + 0.5 * math.log(s)).max() < 1e-9


def test_flux_affine_in_tau(sphere16):
    sec = build_section(Divisor((0.3j,), (1,)), sphere16)
    fluxes = []
    taus = [2.5, 3.0, 4.0, 6.0]
    for tau in taus:
        sol = solve_vortex(VortexProblem(sphere16, sec, tau))
        fine = sphere16.basis.synth(sol.coeffs, fine=True)
        fluxes.append(float(np.sum(np.exp(2 * fine) * sec.fine_density * sphere16.fine_weights)))
    slope, icpt = np.polyfit(taus, fluxes, 1)
    assert slope == pytest.approx(sphere16.volume, rel=1e-9)
    assert icpt == pytest.approx(-4 * math.pi, rel=1e-9)


def test_residual_history_monotone(torus24):
    prob = _problem(torus24, 2, 1.2)
    sol = solve_vortex(prob, "zero")
    res = [h["residual"] for h in sol.history]
    assert all(b < a for a, b in zip(res, res[1:]))


def test_resolution_convergence():
    # spectral refinement acts as the oracle: a finer grid must agree
    coarse, fine = make_sphere_grid(24), make_sphere_grid(40)
    d = Divisor((0.4 + 0.1j, -0.9j), (1, 1))
    tau = 3 * 8 * math.pi / coarse.volume
    a = solve_vortex(VortexProblem(coarse, build_section(d, coarse), tau))
    b = solve_vortex(VortexProblem(fine, build_section(d, fine), tau))
    assert np.abs(resample(b.f, coarse).values - a.f.values).max() < 1e-8


def test_near_bound_warns(sphere16):
    sec = build_section(Divisor((0j,), (1,)), sphere16)
    prob = VortexProblem(sphere16, sec, 2.0 * 1.01)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_vortex(prob)
    assert any("Bradlow" in str(w.message) for w in caught)
    assert sol.residual_norm < 1e-10


def test_flux_check_reports_unconverged(sphere16):
    prob = _problem(sphere16, 1, 2.0)
    sol = solve_vortex(prob)
    bad = type(sol)(sol.f, 0.0, 0, 0.0, sol.coeffs + 0.1, [])
    assert flux_identity_check(bad, prob) > 1e-3


def test_newton_reports_stall():
    # no real root: the line search must stall rather than wander
    with pytest.raises(ConvergenceFailure) as info:
        damped_newton(lambda x: np.array([x[0] ** 2 + 1.0]), lambda x: np.array([[2 * x[0] + 0.5]]),
                      np.array([1.0]), tol=1e-12, max_iter=30)
    assert info.value.history


@settings(max_examples=10, deadline=None)
@given(factor=st.floats(1.1, 20.0), x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_flux_identity_property(factor, x, y):
    grid = make_torus_grid(16, volume=2.0)
    sec = build_section(Divisor((complex(x, y),), (1,)), grid)
    prob = VortexProblem(grid, sec, factor * 4 * math.pi / grid.volume)
    sol = solve_vortex(prob)
    assert sol.flux_defect < 1e-7
