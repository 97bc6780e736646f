"""Fixed points of T_u(v) = S(Phi(v), u) by monotone iteration.

Starting from the subsolution 0 the iterates T_u^k(0) increase to the
minimal solution m(u); starting from the supersolution S(TOP, u) they
decrease to the maximal solution M(u). Each problem family supplies its
own S, Phi, state space and parameter space through a
:class:`ProblemInstance` subclass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticOperator, Nonlinearity, solve_obstacle, residual_vi
from .errors import ConvergenceError, MonotonicityError, PreconditionError, QviError
from .lattice import (DIRICHLET, TOP, Domain1D, GridFunction, NodalFunction, Tolerances,
                      is_top, le, norm)
from .obstacle_maps import (ImpulseConfig, ScalarPhiVariant, phi_gap, phi_heat, phi_scalar,
                            phi_scalar_derivative, phi_truncated_impulse)
from .parabolic import (BoundaryControl, HeatSource, SpaceTimeFunction, SpaceTimeGrid,
                        default_psi, solve_parabolic_obstacle, step_residuals)

MINIMAL = "minimal"
MAXIMAL = "maximal"
_ROUNDOFF = 64 * np.finfo(float).eps


class ProblemInstance:
    """Base class bundling S, Phi, tolerances and structural flags.

    ``unique`` marks instances where the obstacle map is concave on a
    neighbourhood of the nonnegative cone and positive at zero, which makes
    the solution unique and the linearized problem meaningful. ``concave``
    marks instances where S and Phi are concave on nonnegative inputs.
    """

    kind = "abstract"
    unique = False
    concave = False
    # agreement tolerance of the derivative cross-check, in units of tol_inner
    characterization_factor = 10

    def __init__(self, tol):
        self.tol = tol

    # parameter and state spaces
    def parameter(self, u):
        raise NotImplementedError

    def state(self, v):
        raise NotImplementedError

    def direction(self, h):
        """Element of the parameter space without the sign constraint."""
        raise NotImplementedError

    def zero_state(self):
        raise NotImplementedError

    # model maps
    def solve_S(self, p, u, y0=None):
        raise NotImplementedError

    def phi(self, v):
        raise NotImplementedError

    def extremal_shortcut(self, u, y, role):
        """Optionally jump from iterate y towards the extremal solution.

        Must return a point between y and the extremal solution it is
        heading for, or None. The default does nothing.
        """
        return None

    def with_tol(self, tol):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.tol = tol
        return new

    def spot_check(self):
        """Cheap order checks on S and Phi, run once when an instance is loaded."""
        u = self.sample_parameter()
        z = self.zero_state()
        y_top = self.solve_S(TOP, u)
        slack = self.tol.solver_slack
        if not le(z, y_top, slack):
            raise QviError("spot check failed: S(TOP, u) is not nonnegative")
        if not le(self.phi(z), self.phi(y_top), slack):
            raise QviError("spot check failed: Phi is not monotone on (0, S(TOP, u))")
        half = self.solve_S(TOP, 0.5 * u)
        if not le(half, y_top, slack):
            raise QviError("spot check failed: S is not monotone in u")

    def sample_parameter(self):
        raise NotImplementedError

    def residual(self, y, u):
        """Complementarity residual of y against its own obstacle Phi(y)."""
        raise NotImplementedError

    def describe(self):
        return self.kind


class ScalarProblem(ProblemInstance):
    """0-D model: S(p, u) = min(p, u) with a scalar obstacle map."""

    kind = "scalar"

    def __init__(self, variant="A", tol=None):
        super().__init__(tol or Tolerances.scalar_default())
        self.variant = ScalarPhiVariant(variant)
        self.domain = Domain1D.point()
        self.unique = self.variant is ScalarPhiVariant.C
        self.concave = self.variant.concave_on_nonnegatives

    def _point(self, v, what):
        if isinstance(v, GridFunction):
            if v.domain != self.domain:
                raise PreconditionError(f"{what} must be a 0-D value")
            return v
        a = np.asarray(v, dtype=float).reshape(-1)
        if a.size != 1:
            raise PreconditionError(f"{what} must be a 0-D value")
        return GridFunction(self.domain, a)

    def parameter(self, u):
        u = self._point(u, "parameter")
        if u.min() < 0:
            raise PreconditionError("parameter must be nonnegative")
        return u

    def state(self, v):
        return self._point(v, "state")

    def direction(self, h):
        return self._point(h, "direction")

    def zero_state(self):
        return GridFunction.zeros(self.domain)

    def sample_parameter(self):
        return self.parameter(1.5)

    def solve_S(self, p, u, y0=None):
        u = self.parameter(u)
        if is_top(p):
            return u
        return GridFunction(self.domain, np.minimum(p.values, u.values))

    def phi(self, v):
        return GridFunction(self.domain, [phi_scalar(float(v), self.variant)])

    def residual(self, y, u):
        y, u = float(self.state(y)), float(self.parameter(u))
        return abs(min(u - y, phi_scalar(y, self.variant) - y))

    def gap(self, s, u):
        """T_u(s) - s, computed without cancellation."""
        return min(phi_gap(s, self.variant), u - s)

    def psi_derivative(self, y, u, zeta, h):
        """Closed-form directional derivative of (v, u) -> min(Phi(v), u)."""
        y, u, zeta, h = float(y), float(u), float(zeta), float(h)
        kink = self.tol.tol_order
        p = phi_scalar(y, self.variant)
        dp = phi_scalar_derivative(y, zeta, self.variant, kink)
        if abs(p - u) <= kink:
            return min(dp, h)
        return dp if p < u else h

    def extremal_shortcut(self, u, y, role):
        # On [0, inf) the gap s -> T_u(s) - s is concave for concave Phi, so
        # {gap >= 0} is an interval [0, M]; its ends are found by bisection.
        if not self.concave:
            return None
        u, s = float(u), float(y)
        if role == MAXIMAL:
            if self.gap(s, u) >= 0:
                return None
            lo, hi = 0.0, s
            while True:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if self.gap(mid, u) >= 0:
                    lo = mid
                else:
                    hi = mid
            return self.state(lo)
        if self.gap(s, u) <= 0:
            return None
        lo, hi = s, u
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.gap(mid, u) <= 0:
                hi = mid
            else:
                lo = mid
        return self.state(hi)

    def describe(self):
        return f"scalar variant {self.variant.value}"


class ImpulseProblem(ProblemInstance):
    """Elliptic obstacle problem whose obstacle is the truncated min-plus map."""

    kind = "impulse"
    concave = True
    characterization_factor = 20

    def __init__(self, n=64, length=1.0, kappa=1.0, c0=None, f=None, tol=None):
        super().__init__(tol or Tolerances.pde_default())
        self.domain = Domain1D(n, length, DIRICHLET)
        self.op = EllipticOperator(self.domain, f or Nonlinearity.zero())
        if isinstance(c0, ImpulseConfig):
            self.cfg = c0
        else:
            self.cfg = ImpulseConfig(kappa, np.zeros(n) if c0 is None else c0)
        self.unique = self.cfg.kappa > 0

    def parameter(self, u):
        if isinstance(u, GridFunction):
            if u.domain != self.domain:
                raise PreconditionError("parameter lives on a different grid")
        else:
            u = GridFunction(self.domain, np.broadcast_to(np.asarray(u, dtype=float), (self.domain.size,)))
        if u.min() < 0:
            raise PreconditionError("parameter must be nonnegative")
        return u

    def state(self, v):
        if isinstance(v, GridFunction):
            return v
        return GridFunction(self.domain, np.broadcast_to(np.asarray(v, dtype=float), (self.domain.size,)))

    direction = state

    def zero_state(self):
        return GridFunction.zeros(self.domain)

    def sample_parameter(self):
        return self.parameter(8.0)

    def solve_S(self, p, u, y0=None):
        return solve_obstacle(self.op, p, self.parameter(u), self.tol, y0=y0)

    def phi(self, v):
        return phi_truncated_impulse(v, self.cfg)

    def residual(self, y, u):
        return residual_vi(self.op, y, self.phi(y), self.parameter(u))

    def describe(self):
        return (f"impulse n={self.domain.n_interior} kappa={self.cfg.kappa} "
                f"f={self.op.f.kind}/{self.op.f.gamma}")


class ParabolicProblem(ProblemInstance):
    """Parabolic obstacle problem with obstacle psi + w(T), w driven by g(y)."""

    kind = "parabolic"
    concave = True
    characterization_factor = 50

    def __init__(self, grid=None, psi=0.1, g=None, tol=None):
        super().__init__(tol or Tolerances.pde_default())
        self.grid = grid or SpaceTimeGrid(32, 1.0, 64, 1.0)
        if isinstance(psi, GridFunction):
            self.psi = psi
        else:
            self.psi = default_psi(self.grid, psi)
        if self.psi.min() < 0:
            raise PreconditionError("psi must be nonnegative")
        self.g = g or HeatSource()
        self.unique = self.g.eps > 0

    def direction(self, h):
        if isinstance(h, BoundaryControl):
            if h.grid != self.grid:
                raise PreconditionError("control lives on a different grid")
            return h
        return BoundaryControl(self.grid, np.broadcast_to(np.asarray(h, dtype=float),
                                                         (self.grid.n_steps, 2)))

    def parameter(self, u):
        u = self.direction(u)
        if u.min() < 0:
            raise PreconditionError("boundary control must be nonnegative")
        return u

    def state(self, v):
        if isinstance(v, SpaceTimeFunction):
            return v
        return SpaceTimeFunction(self.grid, v)

    def zero_state(self):
        return SpaceTimeFunction.zeros(self.grid)

    def sample_parameter(self):
        return self.parameter(1.0)

    def solve_S(self, p, u, y0=None):
        return solve_parabolic_obstacle(self.grid, p, self.psi, self.parameter(u), self.tol, y0=y0)

    def phi(self, v):
        return phi_heat(v, self.g, self.grid)

    def residual(self, y, u):
        y = self.state(y)
        return float(step_residuals(y, self.phi(y), self.psi, self.parameter(u)).max())

    def describe(self):
        return (f"parabolic n={self.grid.space.n_interior} n_steps={self.grid.n_steps} "
                f"T={self.grid.T} eps={self.g.eps}")


@dataclass
class TraceRow:
    k: int
    residual: float
    min_violation: float
    max_violation: float


@dataclass
class QviSolution:
    """Extremal solution with its iteration history.

    ``min_violation`` in a trace row is the largest nodewise decrease of
    the step (which would break an ascending iteration), ``max_violation``
    the largest increase (which would break a descending one).
    """

    value: NodalFunction
    role: str
    trace: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def residual(self):
        return self.trace[-1].residual if self.trace else 0.0


def apply_T(inst, u, v, y0=None):
    """T_u(v) = S(Phi(v), u)."""
    v = inst.state(v)
    return inst.solve_S(inst.phi(v), u, y0=y0)


def is_subsolution(inst, u, v, slack=None):
    v = inst.state(v)
    slack = inst.tol.solver_slack if slack is None else slack
    return le(v, apply_T(inst, u, v), slack)


def is_supersolution(inst, u, v, slack=None):
    v = inst.state(v)
    slack = inst.tol.solver_slack if slack is None else slack
    return le(apply_T(inst, u, v), v, slack)


def _iterate(inst, u, y, role):
    tol = inst.tol
    slack = tol.solver_slack
    trace = []
    warm = isinstance(inst, (ImpulseProblem, ParabolicProblem))
    for k in range(1, tol.max_outer + 1):
        z = inst.extremal_shortcut(u, y, role)
        z = y if z is None else z
        y_new = apply_T(inst, u, z, y0=z if warm else None)
        step = y_new.values - y.values
        down = float(max(0.0, -step.min()))
        up = float(max(0.0, step.max()))
        diff = float(np.abs(step).max())
        trace.append(TraceRow(k, diff, down, up))
        # noise floor of iterates solved down to rounding level
        floor = _ROUNDOFF * float(np.abs(y_new.values).max())
        bad = up if role == MAXIMAL else down
        if bad > max(slack, floor):
            raise MonotonicityError(
                f"{role} iteration lost monotonicity at step {k} (violation {bad:.3e} > {slack:.1e})",
                trace=trace)
        y = y_new
        if diff <= max(tol.tol_fixed_point, floor):
            return QviSolution(y, role, trace, True)
    raise ConvergenceError(f"{role} iteration did not converge in {tol.max_outer} steps "
                           f"(last residual {trace[-1].residual:.3e})",
                           iterate=y, residual=trace[-1].residual, trace=trace)


def solve_minimal(inst, u):
    """m(u): ascend from 0."""
    u = inst.parameter(u)
    return _iterate(inst, u, inst.zero_state(), MINIMAL)


def solve_maximal(inst, u):
    """M(u): descend from S(TOP, u)."""
    u = inst.parameter(u)
    return _iterate(inst, u, inst.solve_S(TOP, u), MAXIMAL)


def check_uniqueness(inst, u, slack=None):
    slack = inst.tol.solver_slack if slack is None else slack
    m = solve_minimal(inst, u).value
    M = solve_maximal(inst, u).value
    return norm(M - m, math.inf) <= slack
