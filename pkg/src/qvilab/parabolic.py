"""Parabolic obstacle problems with Neumann boundary flux.

Each implicit Euler step solves an elliptic obstacle problem for
I/dt + A_N, where A_N is the Neumann Laplacian obtained by ghost-node
elimination. The heat solver with homogeneous Dirichlet data (used by
the heat-driven obstacle map) lives here as well.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from . import _kernels as K
from .elliptic import Nonlinearity, Tridiagonal
from .errors import ConvergenceError, DomainMismatchError, PreconditionError
from .lattice import (NEUMANN, Domain1D, GridFunction, NodalFunction, Tolerances,
                      check_obstacle, is_top)


class SpaceTimeGrid:
    """Neumann space grid (boundary nodes included) times n_steps time steps."""

    def __init__(self, n_interior, length=1.0, n_steps=64, T=1.0):
        if int(n_steps) != n_steps or n_steps < 1:
            raise PreconditionError("n_steps must be a positive integer")
        if not T > 0:
            raise PreconditionError("T must be positive")
        self.space = Domain1D(n_interior, length, NEUMANN)
        self.n_steps = int(n_steps)
        self.T = float(T)

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def interior(self):
        return self.space.interior()

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def _key(self):
        return (self.space, self.n_steps, self.T)

    def __eq__(self, other):
        return isinstance(other, SpaceTimeGrid) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return (f"SpaceTimeGrid(n_interior={self.space.n_interior}, length={self.space.length}, "
                f"n_steps={self.n_steps}, T={self.T})")

    @cached_property
    def neumann_matrix(self):
        """Rows of I/dt + A_N on all n + 2 nodes."""
        m, h2, inv_dt = self.space.size, self.space.h**2, 1.0 / self.dt
        lower = np.full(m, -1.0 / h2)
        upper = np.full(m, -1.0 / h2)
        upper[0] = lower[-1] = -2.0 / h2
        diag = np.full(m, 2.0 / h2 + inv_dt)
        return Tridiagonal(lower, diag, upper, (2.0 / h2) / (2.0 / h2 + inv_dt))

    @cached_property
    def _dirichlet_cholesky(self):
        n, h2 = self.interior.size, self.space.h**2
        ab = np.zeros((2, n))
        ab[0, 1:] = -1.0 / h2
        ab[1, :] = 2.0 / h2 + 1.0 / self.dt
        return cholesky_banded(ab)


class SpaceTimeFunction(NodalFunction):
    """Trajectory with one row per time level t_k = k*dt, k = 0..n_steps.

    ``space`` is either the Neumann grid of ``grid`` (states) or its
    interior Dirichlet grid (heat sources and heat solutions). For
    quadrature each slice k >= 1 stands for the interval (t_{k-1}, t_k],
    so slice 0 carries zero weight.
    """

    __slots__ = ("grid", "space", "values")

    def __init__(self, grid, values, space=None):
        self.grid = grid
        self.space = grid.space if space is None else space
        if self.space not in (grid.space, grid.interior):
            raise DomainMismatchError("space grid does not belong to the space-time grid")
        arr = np.array(values, dtype=float)
        shape = (grid.n_steps + 1, self.space.size)
        if arr.ndim == 0:
            arr = np.full(shape, float(arr))
        if arr.shape != shape:
            raise PreconditionError(f"expected values of shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("values must be finite")
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def zeros(cls, grid, space=None):
        sp = grid.space if space is None else space
        return cls(grid, np.zeros((grid.n_steps + 1, sp.size)), sp)

    @property
    def support(self):
        return (self.grid, self.space)

    @property
    def weights(self):
        w = np.outer(np.full(self.grid.n_steps + 1, self.grid.dt), self.space.weights)
        w[0] = 0.0
        return w

    def like(self, values):
        return SpaceTimeFunction(self.grid, values, self.space)

    def slice(self, k):
        return GridFunction(self.space, self.values[k])

    @property
    def slices(self):
        return [self.slice(k) for k in range(self.grid.n_steps + 1)]

    @property
    def final(self):
        return self.slice(self.grid.n_steps)


class BoundaryControl(NodalFunction):
    """Boundary flux: row k - 1 holds (left, right) during step k.

    Quadrature weight dt per entry (two boundary points in 1-D).
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        self.grid = grid
        arr = np.array(values, dtype=float)
        shape = (grid.n_steps, 2)
        if arr.ndim == 0:
            arr = np.full(shape, float(arr))
        if arr.shape != shape:
            raise PreconditionError(f"expected values of shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("values must be finite")
        arr.setflags(write=False)
        self.values = arr

    @classmethod
    def constant(cls, grid, left, right=None):
        right = left if right is None else right
        vals = np.empty((grid.n_steps, 2))
        vals[:, 0], vals[:, 1] = left, right
        return cls(grid, vals)

    @classmethod
    def from_sides(cls, grid, left, right):
        return cls(grid, np.column_stack([left, right]))

    @property
    def left(self):
        return self.values[:, 0]

    @property
    def right(self):
        return self.values[:, 1]

    @property
    def support(self):
        return self.grid

    @property
    def weights(self):
        return np.full(self.values.shape, self.grid.dt)

    def like(self, values):
        return BoundaryControl(self.grid, values)


class HeatSource:
    """Source nonlinearity g(s) = min(max(s + eps, 0), 1) / (1 + eps).

    eps = 0 gives the plain clipped identity; eps > 0 makes g concave on
    [-eps, inf) with g(0) > 0.
    """

    def __init__(self, eps=0.0):
        if not eps >= 0:
            raise PreconditionError("eps must be >= 0")
        self.eps = float(eps)

    def __call__(self, s):
        return np.minimum(np.maximum(np.asarray(s, dtype=float) + self.eps, 0.0), 1.0) / (1.0 + self.eps)

    @property
    def lipschitz(self):
        return 1.0 / (1.0 + self.eps)

    def __eq__(self, other):
        return isinstance(other, HeatSource) and other.eps == self.eps

    def __hash__(self):
        return hash(("HeatSource", self.eps))

    def __repr__(self):
        return f"HeatSource(eps={self.eps})"


def _check_control(u, grid):
    if not isinstance(u, BoundaryControl) or u.grid != grid:
        raise PreconditionError("u must be a boundary control on the same grid")
    if np.any(u.values < 0):
        raise PreconditionError("boundary control must be nonnegative")


def flux_loads(u):
    """Per-step nodal loads 2 u / h at the two boundary nodes."""
    grid = u.grid
    loads = np.zeros((grid.n_steps + 1, grid.space.size))
    scale = 2.0 / grid.space.h
    loads[1:, 0] = scale * u.left
    loads[1:, -1] = scale * u.right
    return loads


def solve_parabolic_obstacle(grid, p, psi, u, tol=None, y0=None):
    """Implicit-Euler solution of the parabolic obstacle problem with y <= psi + p.

    ``p`` is TOP or a nonnegative function on ``grid.space``; ``psi`` a
    nonnegative function on the same grid (ignored for TOP). ``y0`` is an
    optional trajectory used as initial guess for every step.
    """
    tol = tol or Tolerances.pde_default()
    check_obstacle(p, grid.space)
    check_obstacle(psi, grid.space)
    _check_control(u, grid)
    m = grid.neumann_matrix
    if is_top(p):
        bound = np.full(grid.space.size, np.inf)
    else:
        bound = np.array(psi.values + p.values)
    traj = np.zeros((grid.n_steps + 1, grid.space.size))
    warm = y0 is not None
    if warm:
        traj[1:] = y0.values[1:]
    args = Nonlinearity.zero()._args()
    failed, res = K.implicit_euler_march(m.lower, m.diag, m.upper, 1.0 / grid.dt, flux_loads(u),
                                         bound, traj, warm, *args, m.omega,
                                         tol.tol_inner, tol.max_inner)
    out = SpaceTimeFunction(grid, traj)
    if failed:
        raise ConvergenceError(f"obstacle solve failed at time step {failed} (residual {res:.3e})",
                               iterate=out, residual=res, step=failed)
    return out


def step_residuals(y, p, psi, u):
    """Complementarity residual of every time step of a trajectory."""
    grid = y.grid
    m = grid.neumann_matrix
    bound = np.full(grid.space.size, np.inf) if is_top(p) else np.array(psi.values + p.values)
    loads = flux_loads(u)
    args = Nonlinearity.zero()._args()
    out = np.zeros(grid.n_steps + 1)
    for k in range(1, grid.n_steps + 1):
        rhs = y.values[k - 1] / grid.dt + loads[k]
        out[k] = K.residual(m.lower, m.diag, m.upper, rhs, bound, np.array(y.values[k]), *args)
    return out


def solve_heat(source, grid):
    """Implicit Euler for w_t - w_xx = source, w = 0 on the boundary, w(0) = 0.

    ``source`` lives on the interior grid; slice k drives step k.
    """
    if not isinstance(source, SpaceTimeFunction) or source.grid != grid:
        raise PreconditionError("source must be a trajectory on the same grid")
    if source.space != grid.interior:
        raise DomainMismatchError("heat source must live on the interior nodes")
    chol = grid._dirichlet_cholesky
    inv_dt = 1.0 / grid.dt
    out = np.zeros_like(source.values)
    for k in range(1, grid.n_steps + 1):
        out[k] = cho_solve_banded((chol, False), out[k - 1] * inv_dt + source.values[k])
    return SpaceTimeFunction(grid, out, grid.interior)


def heat_sup_gain(grid):
    """max_x w(T) for the unit source, i.e. the discrete L^inf gain of the heat map."""
    one = SpaceTimeFunction(grid, np.ones((grid.n_steps + 1, grid.interior.size)), grid.interior)
    return float(solve_heat(one, grid).final.values.max())


def default_psi(grid, value=0.1):
    return GridFunction.constant(grid.space, value)
