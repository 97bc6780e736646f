"""Discrete elliptic obstacle problems on a Dirichlet grid.

The discrete solution y = S(p, u) satisfies the complementarity system::

    u - A y - f(y) >= 0,   p - y >= 0,   (u - A y - f(y)) * (p - y) = 0,

where A is the 3-point Laplacian (-1, 2, -1)/h^2. The solver is a
nonlinear projected SOR (Gauss-Seidel for omega = 1). The 0-D analogue
is plain ``min(p, u)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConvergenceError, PreconditionError
from .lattice import DIRICHLET, GridFunction, Tolerances, check_obstacle, is_top

_EMPTY = np.zeros(2)


@dataclass(frozen=True)
class Nonlinearity:
    """Monotone nodal nonlinearity f with f(0) = 0.

    Use the constructors :meth:`zero`, :meth:`relu` and :meth:`table`.
    """

    kind: int = K.F_ZERO
    gamma: float = 0.0
    xs: tuple = ()
    ys: tuple = ()

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def relu(cls, gamma=1.0):
        if not gamma >= 0:
            raise PreconditionError("gamma must be >= 0")
        return cls(K.F_RELU, float(gamma))

    @classmethod
    def table(cls, xs, ys):
        """Piecewise-linear f through sample points, extended linearly."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise PreconditionError("table needs matching 1-D xs, ys with >= 2 points")
        if np.any(np.diff(xs) <= 0):
            raise PreconditionError("table abscissae must be strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        if np.any(slopes < 0):
            raise PreconditionError("f must be nondecreasing")
        if np.any(np.diff(slopes) < -1e-12 * (1 + np.abs(slopes[1:]))):
            raise PreconditionError("f must be convex")
        f = cls(K.F_TABLE, 0.0, tuple(xs), tuple(ys))
        if abs(f(0.0)) > 1e-12:
            raise PreconditionError("f(0) must vanish")
        return f

    def _args(self):
        if self.kind == K.F_TABLE:
            return self.kind, self.gamma, np.array(self.xs), np.array(self.ys)
        return self.kind, self.gamma, _EMPTY, _EMPTY

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == K.F_ZERO:
            return np.zeros_like(s)
        if self.kind == K.F_RELU:
            return self.gamma * np.maximum(s, 0.0)
        xs, ys = np.array(self.xs), np.array(self.ys)
        out = np.interp(s, xs, ys)
        lo, hi = s < xs[0], s > xs[-1]
        out = np.where(lo, ys[0] + (ys[1] - ys[0]) / (xs[1] - xs[0]) * (s - xs[0]), out)
        out = np.where(hi, ys[-1] + (ys[-1] - ys[-2]) / (xs[-1] - xs[-2]) * (s - xs[-1]), out)
        return out

    @property
    def lipschitz(self):
        if self.kind == K.F_RELU:
            return self.gamma
        if self.kind == K.F_TABLE:
            return float(np.max(np.abs(np.diff(self.ys) / np.diff(self.xs))))
        return 0.0


class Tridiagonal:
    """Row coefficients of a tridiagonal M-matrix, plus an SOR factor."""

    def __init__(self, lower, diag, upper, jacobi_radius):
        self.lower = np.ascontiguousarray(lower, dtype=float)
        self.diag = np.ascontiguousarray(diag, dtype=float)
        self.upper = np.ascontiguousarray(upper, dtype=float)
        # Young's optimal relaxation for the linear part
        mu = min(max(jacobi_radius, 0.0), 1.0 - 1e-15)
        self.omega = 2.0 / (1.0 + math.sqrt(1.0 - mu * mu))

    def matvec(self, y):
        out = self.diag * y
        out[1:] += self.lower[1:] * y[:-1]
        out[:-1] += self.upper[:-1] * y[1:]
        return out

    def dense(self):
        return (np.diag(self.diag) + np.diag(self.lower[1:], -1)
                + np.diag(self.upper[:-1], 1))


class EllipticOperator:
    """-d^2/dx^2 + f on the interior nodes of a Dirichlet grid."""

    def __init__(self, domain, f=None):
        if domain.kind != DIRICHLET:
            raise PreconditionError("elliptic operator needs a Dirichlet grid")
        self.domain = domain
        self.f = f if f is not None else Nonlinearity.zero()
        n, h2 = domain.size, domain.h**2
        d = 2.0 / h2
        mu = math.cos(math.pi / (n + 1)) * d / (d + self.f.lipschitz)
        self.matrix = Tridiagonal(np.full(n, -1.0 / h2), np.full(n, d), np.full(n, -1.0 / h2), mu)

    def apply(self, y):
        """A y + f(y) as an array."""
        y = np.asarray(getattr(y, "values", y), dtype=float)
        return self.matrix.matvec(y) + self.f(y)

    def __repr__(self):
        return f"EllipticOperator(n={self.domain.n_interior}, length={self.domain.length}, f={self.f})"


def _bound_array(p, size):
    return np.full(size, np.inf) if is_top(p) else np.array(p.values, dtype=float)


def _check_load(u, domain):
    if not isinstance(u, GridFunction) or u.domain != domain:
        raise PreconditionError("load must be a grid function on the operator's grid")
    if np.any(u.values < 0):
        raise PreconditionError("load u must be nonnegative")


def pgs_sweeps(op, p, u, y0=None, n_sweeps=1, omega=1.0):
    """Run a fixed number of projected sweeps (no stopping test)."""
    check_obstacle(p, op.domain)
    m = op.matrix
    bound = _bound_array(p, op.domain.size)
    y = np.zeros(op.domain.size) if y0 is None else np.array(y0.values, dtype=float)
    args = op.f._args()
    rhs = np.array(u.values, dtype=float)
    for _ in range(n_sweeps):
        K.sweep(m.lower, m.diag, m.upper, rhs, bound, y, *args, omega)
    return GridFunction(op.domain, y)


def solve_obstacle(op, p, u, tol=None, y0=None):
    """Solution of the discrete obstacle problem S(p, u).

    ``y0`` is an optional initial guess (warm start). Raises
    ConvergenceError after ``tol.max_inner`` sweeps.
    """
    tol = tol or Tolerances()
    check_obstacle(p, op.domain)
    _check_load(u, op.domain)
    m = op.matrix
    bound = _bound_array(p, op.domain.size)
    if y0 is None:
        y = np.zeros(op.domain.size)
    else:
        y = np.array(y0.values, dtype=float)
    np.minimum(y, bound, out=y)
    rhs = np.array(u.values, dtype=float)
    sweeps, ok, diff, res = K.pgs_solve(m.lower, m.diag, m.upper, rhs, bound, y,
                                        *op.f._args(), m.omega, tol.tol_inner, tol.max_inner)
    out = GridFunction(op.domain, y)
    if not ok:
        raise ConvergenceError(f"obstacle solve did not converge in {sweeps} sweeps "
                               f"(difference {diff:.3e}, residual {res:.3e})",
                               iterate=out, residual=res)
    return out


def residual_vi(op, y, p, u):
    """Complementarity residual max_i |min((u - A y - f(y))_i / A_ii, p_i - y_i)|.

    Zero exactly at the discrete solution. The equation part is scaled by
    the diagonal so that both entries carry the units of y.
    """
    m = op.matrix
    bound = _bound_array(p, op.domain.size)
    return float(K.residual(m.lower, m.diag, m.upper, np.array(u.values, dtype=float),
                            bound, np.array(y.values, dtype=float), *op.f._args()))


def solve_scalar_obstacle(p, u):
    """The 0-D obstacle problem: min(p, u), or u when p is TOP."""
    u = float(u)
    if u < 0:
        raise PreconditionError("u must be nonnegative")
    if is_top(p):
        return u
    p = float(p)
    if p < 0:
        raise PreconditionError("finite obstacles must be nonnegative")
    return min(p, u)
