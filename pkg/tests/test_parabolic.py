import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qvilab.errors import ConvergenceError, DomainMismatchError, PreconditionError
from qvilab.lattice import TOP, GridFunction, Tolerances, le, norm
from qvilab.parabolic import (BoundaryControl, HeatSource, SpaceTimeFunction, SpaceTimeGrid,
                              default_psi, heat_sup_gain, solve_heat, solve_parabolic_obstacle,
                              step_residuals)

TIGHT = Tolerances(tol_fixed_point=1e-12, tol_inner=1e-12)


def implicit_euler_neumann(grid, u):
    """Dense per-step linear solves of the ghost-node Neumann heat equation."""
    m, h, dt = grid.space.size, grid.space.h, grid.dt
    A = (np.diag(np.full(m, 2.0)) - np.diag(np.ones(m - 1), 1) - np.diag(np.ones(m - 1), -1)) / h**2
    A[0, 1] = A[-1, -2] = -2.0 / h**2
    M = np.eye(m) / dt + A
    y = np.zeros((grid.n_steps + 1, m))
    for k in range(1, grid.n_steps + 1):
        b = y[k - 1] / dt
        b[0] += 2 * u.left[k - 1] / h
        b[-1] += 2 * u.right[k - 1] / h
        y[k] = np.linalg.solve(M, b)
    return y


def fourier_unit_source(x, t, terms=2000):
    """w_t - w_xx = 1 on (0, 1), w = 0 at both ends, w(0) = 0."""
    k = np.arange(1, 2 * terms, 2)[:, None]
    lam = (k * np.pi) ** 2
    coef = 4 / (k * np.pi) * (1 - np.exp(-lam * t)) / lam
    return np.sum(coef * np.sin(k * np.pi * x[None, :]), axis=0)


def test_zero_flux_gives_zero():
    g = SpaceTimeGrid(8, 1.0, 8, 1.0)
    y = solve_parabolic_obstacle(g, TOP, default_psi(g), BoundaryControl.constant(g, 0.0))
    assert np.all(y.values == 0)


def test_unconstrained_matches_dense_solve():
    g = SpaceTimeGrid(16, 1.0, 32, 1.0)
    t = g.times[1:]
    u = BoundaryControl.from_sides(g, 0.5 + 0.2 * np.sin(4 * t), 0.1 * t)
    y = solve_parabolic_obstacle(g, TOP, default_psi(g), u, TIGHT)
    np.testing.assert_allclose(y.values, implicit_euler_neumann(g, u), atol=1e-10, rtol=0)


def test_constant_flux_is_conservative():
    # total heat grows by 2 u per unit time (both ends feed flux u)
    g = SpaceTimeGrid(16, 1.0, 16, 1.0)
    y = solve_parabolic_obstacle(g, TOP, default_psi(g), BoundaryControl.constant(g, 0.5), TIGHT)
    mass = [np.dot(g.space.weights, s.values) for s in y.slices]
    np.testing.assert_allclose(mass, g.times, atol=1e-10)


def test_zero_obstacle_and_psi_pin_solution():
    g = SpaceTimeGrid(8, 1.0, 8, 1.0)
    zero = GridFunction.zeros(g.space)
    y = solve_parabolic_obstacle(g, zero, zero, BoundaryControl.constant(g, 3.0))
    assert np.all(y.values == 0)


def test_each_step_passes_residual_test():
    g = SpaceTimeGrid(16, 1.0, 16, 1.0)
    psi = default_psi(g)
    p = GridFunction.constant(g.space, 0.05)
    u = BoundaryControl.constant(g, 0.4, 0.1)
    y = solve_parabolic_obstacle(g, p, psi, u)
    assert np.max(step_residuals(y, p, psi, u)) <= 1e-10
    assert np.all(y.values <= psi.values + p.values + 1e-12)


def test_nonconvergence_names_step():
    g = SpaceTimeGrid(16, 1.0, 4, 1.0)
    with pytest.raises(ConvergenceError) as err:
        solve_parabolic_obstacle(g, TOP, default_psi(g), BoundaryControl.constant(g, 1.0),
                                 Tolerances(max_inner=2))
    assert err.value.step == 1
    assert "time step 1" in str(err.value)


def test_precondition_errors():
    g = SpaceTimeGrid(4, 1.0, 4, 1.0)
    with pytest.raises(PreconditionError):
        BoundaryControl(g, np.zeros((3, 2)))
    with pytest.raises(PreconditionError):
        solve_parabolic_obstacle(g, TOP, default_psi(g), BoundaryControl.constant(g, -1.0))
    with pytest.raises(PreconditionError):
        solve_parabolic_obstacle(g, TOP, default_psi(g), BoundaryControl.constant(SpaceTimeGrid(4, 1.0, 5), 1.0))
    with pytest.raises(DomainMismatchError):
        solve_heat(SpaceTimeFunction.zeros(g), g)


def test_heat_zero_source():
    g = SpaceTimeGrid(8, 1.0, 8, 1.0)
    w = solve_heat(SpaceTimeFunction.zeros(g, g.interior), g)
    assert np.all(w.values == 0)


def test_heat_unit_source_against_fourier_series():
    g = SpaceTimeGrid(32, 1.0, 64, 2.0)
    one = SpaceTimeFunction(g, 1.0, g.interior)
    w = solve_heat(one, g).final.values
    x = g.interior.nodes
    exact = fourier_unit_source(x, g.T)
    steady = x * (1 - x) / 2
    assert np.max(np.abs(w - exact)) <= 0.01 * np.max(exact)
    assert np.max(np.abs(w - steady)) <= 0.01 * np.max(steady)
    assert heat_sup_gain(g) == pytest.approx(np.max(w))


@settings(max_examples=20)
@given(arrays(float, (9, 8), elements=st.floats(0, 5)))
def test_heat_positivity(src):
    g = SpaceTimeGrid(8, 1.0, 8, 1.0)
    w = solve_heat(SpaceTimeFunction(g, src, g.interior), g)
    assert w.values.min() >= 0


def test_heat_source_function():
    g0, g5 = HeatSource(), HeatSource(0.5)
    np.testing.assert_allclose(g0([-1, 0.3, 2]), [0, 0.3, 1])
    assert g5(0.0) == pytest.approx(1 / 3)
    assert g5(-0.5) == 0.0
    assert g5.lipschitz == pytest.approx(2 / 3)
    with pytest.raises(PreconditionError):
        HeatSource(-0.1)


G = SpaceTimeGrid(6, 1.0, 8, 1.0)
PSI = default_psi(G)
SLACK = 10 * Tolerances().tol_inner
ctrl = arrays(float, (8, 2), elements=st.floats(0, 2))
obst = arrays(float, 8, elements=st.floats(0, 0.3))


def S(p, u):
    return solve_parabolic_obstacle(G, p if p is TOP else GridFunction(G.space, p), PSI,
                                    BoundaryControl(G, u))


@settings(max_examples=25)
@given(obst, obst, ctrl, ctrl, st.booleans())
def test_comparison(p1, dp, u1, du, top):
    assert le(S(p1, u1), S(TOP if top else p1 + dp, u1 + du), SLACK)


@settings(max_examples=25)
@given(obst, obst, ctrl, ctrl, st.floats(0, 1))
def test_concavity(p1, p2, u1, u2, lam):
    lhs = lam * S(p1, u1) + (1 - lam) * S(p2, u2)
    assert le(lhs, S(lam * p1 + (1 - lam) * p2, lam * u1 + (1 - lam) * u2), SLACK)


@settings(max_examples=25)
@given(obst, obst, ctrl)
def test_obstacle_lipschitz(p1, p2, u):
    lhs = norm(S(p1, u) - S(p2, u), math.inf)
    assert lhs <= np.max(np.abs(p1 - p2)) + SLACK


@pytest.mark.parametrize("obstacle", [None, 0.05])
def test_control_lipschitz_ratio_nonincreasing_under_refinement(obstacle):
    ratios = []
    for n in (4, 8, 16, 32, 64):
        g = SpaceTimeGrid(n, 1.0, 64, 1.0)
        p = TOP if obstacle is None else GridFunction.constant(g.space, obstacle)
        t = g.times[1:]
        u1 = BoundaryControl.from_sides(g, 0.3 + 0.2 * np.sin(3 * t), 0.2 + 0.1 * t)
        u2 = BoundaryControl.from_sides(g, 0.35 + 0.2 * np.sin(3 * t), 0.1 + 0.1 * t)
        y1 = solve_parabolic_obstacle(g, p, default_psi(g), u1)
        y2 = solve_parabolic_obstacle(g, p, default_psi(g), u2)
        ratios.append(norm(y1 - y2, 2) / norm(u1 - u2, 2))
    assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))
