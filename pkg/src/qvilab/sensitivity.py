"""Stability and sensitivity of the maximal solution map u -> M(u).

Includes Lipschitz certificates, concavity checks, monotone difference
quotients, perturbed-direction (Hadamard) checks, directional derivatives
of Psi(v, u) = S(Phi(v), u) and the smallest solution of the linearized
fixed-point problem zeta = Psi'((y, u); (zeta, h)).

Every solve whose output gets differenced runs with the much tighter
tolerances of :meth:`Tolerances.refined`, because quotient noise scales
like solver error divided by the step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import ScalarProblem, solve_maximal, solve_minimal
from .errors import AssumptionRefusal, ConvergenceError, PreconditionError
from .lattice import le, norm, parse_exponent


@dataclass(frozen=True)
class TauSchedule:
    """Geometric step sequence tau_n = tau0 * ratio**n, n = 0..count-1."""

    tau0: float = 2.0**-4
    ratio: float = 0.5
    count: int = 20

    def __post_init__(self):
        if not self.tau0 > 0:
            raise PreconditionError("tau0 must be positive")
        if not 0 < self.ratio < 1:
            raise PreconditionError("ratio must lie in (0, 1)")
        if self.count < 1:
            raise PreconditionError("count must be positive")

    @property
    def taus(self):
        return [self.tau0 * self.ratio**n for n in range(self.count)]

    @classmethod
    def default(cls, inst, u, h, tau0=2.0**-4):
        """Schedule clamped to the admissibility radius of u + tau*h.

        Dyadic steps keep u + tau*h exact for dyadic data. Grid problems
        get fewer steps: below about 1e-7 their quotients are dominated by
        solver noise.
        """
        count = 20 if isinstance(inst, ScalarProblem) else 18
        return cls(min(tau0, admissibility_radius(u, h)), 0.5, count)


def admissibility_radius(u, h):
    """(min u) / (2 max h^-), or inf if h >= 0."""
    neg = float(np.max(np.maximum(-h.values, 0.0)))
    if neg == 0:
        return math.inf
    return u.min() / (2.0 * neg)


def _precise(inst):
    return inst.with_tol(inst.tol.refined())


def _solution_slack(inst):
    return 10.0 * inst.tol.tol_fixed_point


def _interior_parameter(inst, u):
    u = inst.parameter(u)
    c = u.min()
    if not c > 0:
        raise PreconditionError("parameter must be bounded below by a positive constant")
    return u, c


@dataclass
class LipschitzReport:
    q: float
    lhs_min: float
    lhs_max: float
    rho: float
    bound_min: float
    bound_max: float
    slack: float

    @property
    def satisfied(self):
        return (self.lhs_min <= self.bound_min + self.slack
                and self.lhs_max <= self.bound_max + self.slack)


def lipschitz_certificate(inst, u, v, q=2, rho=None, slack=None):
    """Evaluate both sides of the local Lipschitz estimates for m and M.

    With c = min u, 0 < rho < c and ||u - v||_inf <= c - rho:
    ||m(u) - m(v)||_q <= ||m(u)||_q ||u - v||_inf / rho, and the same for M.
    ``rho`` defaults to c - ||u - v||_inf.
    """
    q = parse_exponent(q)
    u, c = _interior_parameter(inst, u)
    v = inst.parameter(v)
    eps = norm(u - v, math.inf)
    if rho is None:
        rho = c - eps
    rho = float(rho)
    if not 0 < rho < c:
        raise PreconditionError(f"rho must lie in (0, {c!r})")
    if eps > (c - rho) * (1 + 1e-12):
        raise PreconditionError("perturbation too large: need ||u - v||_inf <= c - rho")
    slack = _solution_slack(inst) if slack is None else slack
    m_u, m_v = solve_minimal(inst, u).value, solve_minimal(inst, v).value
    M_u, M_v = solve_maximal(inst, u).value, solve_maximal(inst, v).value
    return LipschitzReport(
        q=q,
        lhs_min=norm(m_u - m_v, q),
        lhs_max=norm(M_u - M_v, q),
        rho=rho,
        bound_min=norm(m_u, q) * eps / rho,
        bound_max=norm(M_u, q) * eps / rho,
        slack=slack,
    )


def concavity_check(inst, u1, u2, lam, slack=None):
    """lam M(u1) + (1 - lam) M(u2) <= M(lam u1 + (1 - lam) u2), nodewise."""
    if not 0 <= lam <= 1:
        raise PreconditionError("lambda must lie in [0, 1]")
    u1, u2 = inst.parameter(u1), inst.parameter(u2)
    slack = _solution_slack(inst) if slack is None else slack
    mix = solve_maximal(inst, lam * u1 + (1 - lam) * u2).value
    lhs = lam * solve_maximal(inst, u1).value + (1 - lam) * solve_maximal(inst, u2).value
    return le(lhs, mix, slack)


@dataclass
class DerivativeEstimate:
    """Difference quotients (M(u + tau h) - M(u)) / tau along a schedule."""

    schedule: TauSchedule
    taus: list
    quotients: list
    q: float
    norms: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    settled: bool = False

    @property
    def derivative(self):
        return self.quotients[-1]

    @property
    def monotonicity_residual(self):
        return max(self.violations) if self.violations else 0.0

    @property
    def cauchy_residual(self):
        if len(self.quotients) < 2:
            return math.inf
        return norm(self.quotients[-1] - self.quotients[-2], self.q)


def _quotient(inst, base, u, h, tau):
    shifted = solve_maximal(inst, u + tau * h).value
    return (shifted - base) / tau


def directional_derivative(inst, u, h, schedule=None, q=2, settle=None, min_steps=4):
    """M'(u; h) as the last of the monotone difference quotients.

    The schedule is cut short once two successive quotients agree to
    ``settle`` in the sup norm (default: the solver slack), after at least
    ``min_steps`` quotients. Steps with u + tau*h < 0 somewhere are dropped.
    """
    q = parse_exponent(q)
    u, _ = _interior_parameter(inst, u)
    h = inst.direction(h)
    schedule = schedule or TauSchedule.default(inst, u, h)
    settle = inst.tol.solver_slack if settle is None else settle
    exact = _precise(inst)
    base = solve_maximal(exact, u).value
    taus, quotients, norms, violations = [], [], [], []
    settled = False
    for tau in schedule.taus:
        if (u + tau * h).min() < 0:
            continue
        d = _quotient(exact, base, u, h, tau)
        if quotients:
            violations.append(float(max(0.0, np.max(quotients[-1].values - d.values))))
            settled = norm(d - quotients[-1], math.inf) <= settle
        else:
            violations.append(0.0)
        taus.append(tau)
        quotients.append(d)
        norms.append(norm(d, q))
        if settled and len(quotients) >= min_steps:
            break
    if not quotients:
        raise PreconditionError("u + tau*h is inadmissible for every scheduled tau")
    return DerivativeEstimate(schedule, taus, quotients, q, norms, violations, settled)


@dataclass
class HadamardReport:
    errors: list
    noise_floor: float
    threshold: float | None = None

    @property
    def decreasing(self):
        return all(b <= a + self.noise_floor for a, b in zip(self.errors, self.errors[1:]))

    @property
    def passed(self):
        ok = self.decreasing
        if self.threshold is not None:
            ok = ok and self.errors[-1] <= self.threshold
        return ok


def alternating_perturbations(inst, h, n_max=8, tau=2.0**-6):
    """Pairs (tau/n, h + alt/n) with alt the +-1 profile, n = 1..n_max."""
    h = inst.direction(h)
    alt = h.like(np.where(np.arange(h.values.size).reshape(h.values.shape) % 2 == 0, 1.0, -1.0))
    return [(tau / n, h + alt / n) for n in range(1, n_max + 1)]


def hadamard_check(inst, u, h, perturbations, q=math.inf, reference=None, threshold=None):
    """Errors ||(M(u + tau_n h_n) - M(u)) / tau_n - M'(u; h)||_q for each n."""
    q = parse_exponent(q)
    u, _ = _interior_parameter(inst, u)
    h = inst.direction(h)
    if reference is None:
        reference = directional_derivative(inst, u, h, q=q).derivative
    exact = _precise(inst)
    base = solve_maximal(exact, u).value
    errors = []
    for n, (tau, hn) in enumerate(perturbations, start=1):
        hn = inst.direction(hn)
        if not tau > 0 or (u + tau * hn).min() < 0:
            raise PreconditionError(f"perturbation n={n} leaves the parameter space")
        d = _quotient(exact, base, u, hn, tau)
        errors.append(norm(d - reference, q))
    return HadamardReport(errors, inst.tol.solver_slack, threshold)


@dataclass
class PsiEstimate:
    value: object
    sigmas: list
    cauchy_residual: float
    monotonicity_residual: float


def _psi(inst, v, u, y0=None):
    return inst.solve_S(inst.phi(v), u, y0=y0)


def psi_derivative_estimate(inst, y, u, zeta, h, schedule=None, tol=None):
    """Finite-difference Psi'((y, u); (zeta, h)) along a shrinking sigma schedule.

    Stops at the first sigma whose quotient is within tol of the previous
    one. Past that point solver noise (about solver error / sigma) takes
    over, so the schedule is not run to the end.
    """
    exact = _precise(inst)
    y, zeta = inst.state(y), inst.state(zeta)
    u, h = inst.parameter(u), inst.direction(h)
    schedule = schedule or TauSchedule(2.0**-6, 0.5, 40)
    tol = 10 * inst.tol.tol_inner if tol is None else tol
    base = _psi(exact, y, u)
    warm = None if isinstance(inst, ScalarProblem) else base
    sigmas, prev, worst, cauchy = [], None, 0.0, math.inf
    for sigma in schedule.taus:
        if (u + sigma * h).min() < 0:
            continue
        d = (_psi(exact, y + sigma * zeta, u + sigma * h, y0=warm) - base) / sigma
        sigmas.append(sigma)
        if prev is not None:
            worst = max(worst, float(max(0.0, np.max(prev.values - d.values))))
            cauchy = norm(d - prev, math.inf)
            if cauchy <= tol:
                return PsiEstimate(d, sigmas, cauchy, worst)
        prev = d
    raise ConvergenceError(f"Psi' quotients did not settle (Cauchy residual {cauchy:.3e})",
                           iterate=prev, residual=cauchy)


def psi_directional_derivative(inst, y, u, zeta, h, schedule=None, tol=None, method="auto"):
    """Psi'((y, u); (zeta, h)); closed form for scalar problems unless method='fd'."""
    if method not in ("auto", "closed", "fd"):
        raise PreconditionError("method must be 'auto', 'closed' or 'fd'")
    if method != "fd" and isinstance(inst, ScalarProblem):
        return inst.state(inst.psi_derivative(float(inst.state(y)), float(inst.parameter(u)),
                                              float(inst.state(zeta)), float(inst.direction(h))))
    if method == "closed":
        raise PreconditionError("closed-form Psi' is only available for scalar problems")
    return psi_derivative_estimate(inst, y, u, zeta, h, schedule, tol).value


def _require_unique(inst):
    if not inst.unique:
        raise AssumptionRefusal(
            f"{inst.describe()}: the obstacle map is not concave and positive near zero, so "
            "the linearized equation can be degenerate (every zeta solves zeta = Psi'(zeta)) "
            "and carries no information about the derivative")


@dataclass
class LinearizedResult:
    value: object
    seed: object
    trace: list


def linearized_smallest(inst, u, h, schedule=None, tol=None, max_iter=1000):
    """Kleene iteration for the smallest solution of zeta = Psi'((M(u), u); (zeta, h)).

    The seed is the first difference quotient of the schedule, which is a
    subsolution of the linearized map. Returns a :class:`LinearizedResult`.
    """
    _require_unique(inst)
    u, _ = _interior_parameter(inst, u)
    h = inst.direction(h)
    schedule = schedule or TauSchedule.default(inst, u, h)
    tol = inst.tol.tol_inner if tol is None else tol
    exact = _precise(inst)
    y = solve_maximal(exact, u).value
    tau = next((t for t in schedule.taus if (u + t * h).min() >= 0), None)
    if tau is None:
        raise PreconditionError("u + tau*h is inadmissible for every scheduled tau")
    zeta = _quotient(exact, y, u, h, tau)
    seed, trace = zeta, []
    slack = inst.tol.solver_slack
    for k in range(1, max_iter + 1):
        nxt = psi_directional_derivative(inst, y, u, zeta, h)
        step = nxt.values - zeta.values
        diff = float(np.abs(step).max())
        trace.append((k, diff, float(max(0.0, -step.min()))))
        if -step.min() > slack:
            raise ConvergenceError(f"Kleene iterates decreased at step {k} by {-step.min():.3e}",
                                   iterate=nxt, residual=diff, trace=trace)
        zeta = nxt
        if diff <= tol:
            return LinearizedResult(zeta, seed, trace)
    raise ConvergenceError(f"Kleene iteration did not converge in {max_iter} steps",
                           iterate=zeta, residual=trace[-1][1], trace=trace)


def solve_linearized_smallest(inst, u, h, schedule=None, tol=None):
    """Smallest solution of the linearized fixed-point problem."""
    return linearized_smallest(inst, u, h, schedule, tol).value


@dataclass
class CharacterizationReport:
    derivative: object
    linearized: object
    error: float
    fixed_point_residual: float
    tol: float

    @property
    def passed(self):
        return self.error <= self.tol and self.fixed_point_residual <= self.tol


def characterization_check(inst, u, h, q=2, tol=None, schedule=None):
    """Compare M'(u; h) from quotients with the smallest linearized solution.

    Also checks that the quotient derivative is itself a fixed point of
    the linearized map.
    """
    _require_unique(inst)
    q = parse_exponent(q)
    tol = inst.characterization_factor * inst.tol.tol_inner if tol is None else tol
    u, _ = _interior_parameter(inst, u)
    h = inst.direction(h)
    est = directional_derivative(inst, u, h, schedule, q)
    zeta = solve_linearized_smallest(inst, u, h, schedule)
    y = solve_maximal(_precise(inst), u).value
    image = psi_directional_derivative(inst, y, u, est.derivative, h)
    return CharacterizationReport(
        derivative=est.derivative,
        linearized=zeta,
        error=norm(est.derivative - zeta, q),
        fixed_point_residual=norm(image - est.derivative, q),
        tol=tol,
    )
