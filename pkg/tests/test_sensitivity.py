import math

import numpy as np
import pytest

from qvilab.engine import ImpulseProblem, ScalarProblem, solve_maximal
from qvilab.errors import AssumptionRefusal, PreconditionError
from qvilab.lattice import le, norm
from qvilab.sensitivity import (TauSchedule, alternating_perturbations, characterization_check,
                                concavity_check, directional_derivative, hadamard_check,
                                linearized_smallest, lipschitz_certificate,
                                psi_directional_derivative, solve_linearized_smallest)

A, B, C = ScalarProblem("A"), ScalarProblem("B"), ScalarProblem("C")
IMPULSE = ImpulseProblem(n=32)


def test_schedule():
    s = TauSchedule(0.1, 0.5, 4)
    assert s.taus == [0.1, 0.05, 0.025, 0.0125]
    for bad in [(0, 0.5, 3), (1, 1.0, 3), (1, 0.5, 0)]:
        with pytest.raises(PreconditionError):
            TauSchedule(*bad)
    d = TauSchedule.default(C, C.parameter(1.0), C.direction(-1.0))
    assert d.tau0 == 2.0**-4 and d.count == 20
    assert TauSchedule.default(C, C.parameter(0.1), C.direction(-1.0)).tau0 == pytest.approx(0.05)


def test_lipschitz_scalar_B():
    r = lipschitz_certificate(B, 2.0, 1.9, q=math.inf, rho=1.9)
    assert r.lhs_max == pytest.approx(0.1, abs=1e-12)
    assert r.bound_max == pytest.approx(2 * 0.1 / 1.9, abs=1e-12)
    assert r.satisfied


def test_lipschitz_equal_inputs_and_preconditions():
    r = lipschitz_certificate(C, 1.5, 1.5, q=2, rho=1.0)
    assert r.lhs_min == r.lhs_max == r.bound_min == r.bound_max == 0 and r.satisfied
    with pytest.raises(PreconditionError):
        lipschitz_certificate(C, 1.5, 1.4, rho=1.5)
    with pytest.raises(PreconditionError):
        lipschitz_certificate(C, 1.5, 1.0, rho=1.2)
    with pytest.raises(PreconditionError):
        lipschitz_certificate(C, 0.0, 0.0)


@pytest.mark.parametrize("q", [1, 2, math.inf])
def test_lipschitz_impulse(q):
    r = lipschitz_certificate(IMPULSE, 8.0, 7.5, q=q, rho=7.0)
    assert r.satisfied and r.lhs_max > 0


def test_concavity_examples():
    assert concavity_check(A, 0.0, 2.0, 0.5)
    for lam in (0.0, 1.0):
        assert concavity_check(C, 0.5, 3.0, lam, slack=0.0)
    rng = np.random.default_rng(1)
    for _ in range(3):
        u1, u2 = rng.uniform(1, 10, 2)
        assert concavity_check(IMPULSE, u1, u2, float(rng.uniform()))
    with pytest.raises(PreconditionError):
        concavity_check(C, 1.0, 2.0, 1.5)


@pytest.mark.parametrize("u,h,expected", [(2.0, 1.0, 0.0), (0.5, -1.0, -1.0), (1.0, 1.0, 0.0),
                                          (1.0, -1.0, -1.0), (0.5, 1.0, 1.0)])
def test_derivative_A(u, h, expected):
    est = directional_derivative(A, u, h)
    assert float(est.derivative) == pytest.approx(expected, abs=1e-8)
    assert est.monotonicity_residual <= 1e-12


@pytest.mark.parametrize("u,h,expected", [(0.5, 1, 1), (1.0, 1, 1), (1.5, 1, 1), (2.5, 1, 0), (3.0, 1, 0),
                                          (0.5, -1, -1), (1.0, -1, -1), (1.5, -1, -1), (2.0, -1, -1),
                                          (2.0, 1, 0), (2.5, -1, 0), (3.0, -1, 0)])
def test_derivative_C(u, h, expected):
    assert float(directional_derivative(C, u, h).derivative) == pytest.approx(expected, abs=1e-8)


def test_derivative_inadmissible_schedule():
    with pytest.raises(PreconditionError):
        directional_derivative(C, 1.0, -1.0, schedule=TauSchedule(4.0, 0.9, 3))


def test_quotients_below_derivative_and_norm_bound():
    rng = np.random.default_rng(7)
    for _ in range(3):
        u = IMPULSE.parameter(rng.uniform(2, 10, 32))
        h = IMPULSE.direction(rng.uniform(-1, 1, 32))
        est = directional_derivative(IMPULSE, u, h)
        slack = IMPULSE.tol.solver_slack
        assert all(le(d, est.derivative, slack) for d in est.quotients)
        assert est.monotonicity_residual <= slack
        M = solve_maximal(IMPULSE, u).value
        for q in (1, 2, math.inf):
            lhs = norm(est.derivative, q)
            assert lhs <= norm(M, q) * norm(h, math.inf) / u.min() + slack


def test_hadamard_scalar_A():
    pert = [(1.0 / n, 1.0 + 1.0 / n) for n in range(1, 9)]
    rep = hadamard_check(A, 2.0, 1.0, pert)
    assert rep.errors == [0.0] * 8 and rep.passed


def test_hadamard_constant_direction_reduces_to_quotients():
    pert = [(2.0**-k, 1.0) for k in range(2, 8)]
    rep = hadamard_check(C, 1.0, 1.0, pert, reference=C.direction(1.0))
    assert max(rep.errors) <= 1e-12


def test_hadamard_impulse_alternating():
    u, h = IMPULSE.parameter(8.0), IMPULSE.direction(1.0)
    rep = hadamard_check(IMPULSE, u, h, alternating_perturbations(IMPULSE, h, 6))
    assert rep.decreasing and rep.errors[-1] < rep.errors[0]


def test_hadamard_rejects_inadmissible_perturbation():
    with pytest.raises(PreconditionError, match="n=2"):
        hadamard_check(C, 1.0, -1.0, [(0.1, -1.0), (5.0, -1.0)], reference=C.direction(-1.0))


@pytest.mark.parametrize("zeta,expected", [(-1.0, -0.5), (1.0, 0.0)])
def test_psi_derivative_C(zeta, expected):
    for method in ("closed", "fd"):
        got = float(psi_directional_derivative(C, 2.0, 3.0, zeta, 0.0, method=method))
        assert got == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("zeta", [-1.0, 0.5, 2.0])
def test_psi_derivative_A_is_identity(zeta):
    for method in ("closed", "fd"):
        assert float(psi_directional_derivative(A, 1.0, 2.0, zeta, 0.0, method=method)) == \
            pytest.approx(zeta, abs=1e-10)


def test_psi_derivative_zero_direction():
    assert float(psi_directional_derivative(C, 1.3, 2.0, 0.0, 0.0)) == 0.0
    z = psi_directional_derivative(IMPULSE, solve_maximal(IMPULSE, 8.0).value, 8.0, 0.0, 0.0)
    assert norm(z, math.inf) <= 1e-12


@pytest.mark.parametrize("y,u,zeta,h", [(0.5, 1.0, 1.0, -1.0), (2.0, 2.0, -1.0, 0.5), (-2.0, 1.0, 1.0, 0.0),
                                        (1.0, 1.5, 0.3, 1.0), (3.0, 3.0, 1.0, -1.0)])
def test_closed_form_and_fd_agree(y, u, zeta, h):
    closed = float(psi_directional_derivative(C, y, u, zeta, h, method="closed"))
    fd = float(psi_directional_derivative(C, y, u, zeta, h, method="fd"))
    assert closed == pytest.approx(fd, abs=1e-9)


def test_linearized_examples():
    assert float(solve_linearized_smallest(C, 3.0, 1.0)) == pytest.approx(0.0, abs=1e-10)
    assert float(solve_linearized_smallest(C, 1.0, -0.5)) == pytest.approx(-0.5, abs=1e-10)


def test_linearized_refuses_degenerate_instance():
    with pytest.raises(AssumptionRefusal):
        solve_linearized_smallest(A, 2.0, 1.0)
    with pytest.raises(AssumptionRefusal):
        characterization_check(B, 1.5, 1.0)


def test_seed_is_linearized_subsolution_and_iterates_ascend():
    u, h = IMPULSE.parameter(8.0), IMPULSE.direction(1.0)
    res = linearized_smallest(IMPULSE, u, h)
    y = solve_maximal(IMPULSE.with_tol(IMPULSE.tol.refined()), u).value
    image = psi_directional_derivative(IMPULSE, y, u, res.seed, h)
    slack = IMPULSE.tol.solver_slack
    assert le(res.seed, image, slack)
    assert le(res.seed, res.value, slack)
    assert all(row[2] <= slack for row in res.trace)


@pytest.mark.parametrize("h,expected", [(1.0, [1, 1, 1, 0, 0]), (-1.0, [-1, -1, -1, 0, 0])])
def test_characterization_C_table(h, expected):
    for u, e in zip([0.5, 1.0, 1.5, 2.5, 3.0], expected):
        r = characterization_check(C, u, h)
        assert r.passed
        assert float(r.derivative) == pytest.approx(e, abs=1e-8)
        assert float(r.linearized) == pytest.approx(e, abs=1e-8)


def test_characterization_impulse():
    r = characterization_check(IMPULSE, 8.0, 1.0)
    assert r.passed and r.tol == pytest.approx(20 * IMPULSE.tol.tol_inner)
