"""Randomized structural checks shared by the harness and the test-suite.

Every check returns a :class:`Check`; nothing here raises on failure.
Random inputs come from a ``numpy.random.Generator`` supplied by the
caller, so a fixed seed reproduces a run exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import (ImpulseProblem, ParabolicProblem, ScalarProblem, check_uniqueness,
                     solve_maximal, solve_minimal)
from .lattice import le, norm
from .parabolic import solve_parabolic_obstacle
from .sensitivity import (characterization_check, concavity_check, directional_derivative,
                          lipschitz_certificate)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}" + (f": {self.detail}" if self.detail else "")


DEFAULT_RANGES = {"scalar": (0.2, 5.0), "impulse": (2.0, 20.0), "parabolic": (0.05, 0.5)}


def _shape(inst):
    if isinstance(inst, ScalarProblem):
        return (1,)
    if isinstance(inst, ImpulseProblem):
        return (inst.domain.size,)
    return (inst.grid.n_steps, 2)


def random_parameter(inst, rng, low=None, high=None):
    lo, hi = DEFAULT_RANGES[inst.kind]
    lo = lo if low is None else low
    hi = hi if high is None else high
    return inst.parameter(rng.uniform(lo, hi, _shape(inst)))


def random_direction(inst, rng, scale=1.0):
    return inst.direction(rng.uniform(-scale, scale, _shape(inst)))


def comparison(inst, rng, low=None, high=None):
    u1 = random_parameter(inst, rng, low, high)
    u2 = u1 + inst.parameter(rng.uniform(0.0, 0.5 * u1.min(), _shape(inst)))
    slack = 10 * inst.tol.tol_fixed_point
    ok_m = le(solve_minimal(inst, u1).value, solve_minimal(inst, u2).value, slack)
    ok_M = le(solve_maximal(inst, u1).value, solve_maximal(inst, u2).value, slack)
    return Check("comparison", ok_m and ok_M, f"m ordered: {ok_m}, M ordered: {ok_M}")


def concavity(inst, rng, low=None, high=None):
    u1, u2 = random_parameter(inst, rng, low, high), random_parameter(inst, rng, low, high)
    lam = float(rng.uniform(0.0, 1.0))
    return Check("concavity", concavity_check(inst, u1, u2, lam), f"lambda = {lam!r}")


def random_pair(inst, rng, low=None, high=None):
    """u and a perturbation v with ||u - v||_inf <= (min u) / 2."""
    u = random_parameter(inst, rng, low, high)
    c = u.min()
    v = inst.parameter(np.maximum(u.values + rng.uniform(-0.5 * c, 0.5 * c, _shape(inst)), 0.0))
    return u, v


def lipschitz(inst, rng, qs=(1, 2, math.inf), low=None, high=None):
    u, v = random_pair(inst, rng, low, high)
    worst = []
    ok = True
    for q in qs:
        r = lipschitz_certificate(inst, u, v, q)
        ok = ok and r.satisfied
        worst.append(f"q={q}: {r.lhs_max:.3e} <= {r.bound_max:.3e}")
    return Check("lipschitz", ok, "; ".join(worst))


def quotient_monotonicity(inst, rng, low=None, high=None):
    u = random_parameter(inst, rng, low, high)
    h = random_direction(inst, rng)
    est = directional_derivative(inst, u, h)
    slack = inst.tol.solver_slack
    r = est.monotonicity_residual
    return Check("quotient monotonicity", r <= slack, f"residual {r:.3e} (slack {slack:.1e})")


def uniqueness(inst, rng, low=None, high=None):
    u = random_parameter(inst, rng, low, high)
    return Check("uniqueness", check_uniqueness(inst, u), f"slack {inst.tol.solver_slack:.1e}")


def characterization(inst, rng, low=None, high=None):
    u = random_parameter(inst, rng, low, high)
    h = random_direction(inst, rng)
    r = characterization_check(inst, u, h)
    return Check("characterization", r.passed,
                 f"error {r.error:.3e}, fixed-point residual {r.fixed_point_residual:.3e}, "
                 f"tol {r.tol:.1e}")


def obstacle_lipschitz(inst, rng, low=None, high=None):
    """||S(p1, u) - S(p2, u)||_inf <= ||p1 - p2||_inf for the parabolic S."""
    if not isinstance(inst, ParabolicProblem):
        raise TypeError("obstacle Lipschitz check is defined for parabolic problems")
    u = random_parameter(inst, rng, low, high)
    space = inst.grid.space
    p1 = inst.psi.like(rng.uniform(0.0, 0.2, space.size))
    p2 = inst.psi.like(rng.uniform(0.0, 0.2, space.size))
    y1 = solve_parabolic_obstacle(inst.grid, p1, inst.psi, u, inst.tol)
    y2 = solve_parabolic_obstacle(inst.grid, p2, inst.psi, u, inst.tol)
    lhs, rhs = norm(y1 - y2, math.inf), norm(p1 - p2, math.inf)
    return Check("obstacle lipschitz", lhs <= rhs + inst.tol.solver_slack,
                 f"{lhs:.3e} <= {rhs:.3e}")


SUITES = {
    "scalar": (comparison, lipschitz),
    "impulse": (comparison, concavity, lipschitz, quotient_monotonicity, uniqueness,
                characterization),
    "parabolic": (comparison, concavity, obstacle_lipschitz, lipschitz, quotient_monotonicity,
                  uniqueness, characterization),
}


def suite_for(inst):
    """The checks that the instance's structure guarantees."""
    checks = list(SUITES[inst.kind])
    if not inst.concave:
        checks = [c for c in checks if c not in (concavity, quotient_monotonicity)]
    if not inst.unique:
        checks = [c for c in checks if c not in (uniqueness, characterization)]
    return checks


def run_suite(inst, rng, samples, checks=None, low=None, high=None):
    """Run every check ``samples`` times; returns {name: [Check, ...]}."""
    checks = suite_for(inst) if checks is None else checks
    out = {}
    for check in checks:
        results = [check(inst, rng, low=low, high=high) for _ in range(samples)]
        out[results[0].name] = results
    return out
