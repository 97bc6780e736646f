"""Discrete function spaces on uniform 1-D grids.

A grid function stores nodal values together with quadrature weights.
Functions are ordered pointwise, and the weights turn sums into discrete
L^q norms. Obstacles may additionally take the value ``TOP``, the
largest element, which means "no constraint".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainMismatchError, PreconditionError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
POINT = "point"


@dataclass(frozen=True)
class Domain1D:
    """Uniform grid on (0, length) with ``n_interior`` interior nodes.

    ``kind`` selects which nodes carry unknowns:

    * ``"dirichlet"``: interior nodes x_i = i*h, i = 1..n, weight h each;
    * ``"neumann"``: all nodes i = 0..n+1, trapezoid weights (h/2 at the ends);
    * ``"point"``: a single node of weight 1 (the 0-D case).
    """

    n_interior: int
    length: float = 1.0
    kind: str = DIRICHLET

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN, POINT):
            raise PreconditionError(f"unknown domain kind {self.kind!r}")
        if int(self.n_interior) != self.n_interior or self.n_interior < 1:
            raise PreconditionError("n_interior must be a positive integer")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise PreconditionError("length must be a positive real")
        object.__setattr__(self, "n_interior", int(self.n_interior))
        object.__setattr__(self, "length", float(self.length))

    @classmethod
    def point(cls):
        return cls(1, 1.0, POINT)

    @property
    def singleton(self):
        return self.kind == POINT

    @property
    def h(self):
        if self.singleton:
            return 1.0
        return self.length / (self.n_interior + 1)

    @property
    def size(self):
        if self.kind == NEUMANN:
            return self.n_interior + 2
        if self.kind == POINT:
            return 1
        return self.n_interior

    @property
    def nodes(self):
        if self.singleton:
            return np.zeros(1)
        idx = np.arange(self.size) + (0 if self.kind == NEUMANN else 1)
        return idx * self.h

    @property
    def weights(self):
        if self.singleton:
            return np.ones(1)
        w = np.full(self.size, self.h)
        if self.kind == NEUMANN:
            w[0] = w[-1] = 0.5 * self.h
        return w

    def interior(self):
        """The Dirichlet grid sharing this grid's interior nodes."""
        return replace(self, kind=DIRICHLET)

    def with_boundary(self):
        return replace(self, kind=NEUMANN)


def _as_array(values, shape):
    arr = np.array(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(shape, float(arr))
    if arr.shape != shape:
        raise PreconditionError(f"expected values of shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError("values must be finite")
    arr.setflags(write=False)
    return arr


class NodalFunction:
    """Shared behaviour of immutable nodal data: arithmetic and comparisons.

    Subclasses provide ``values``, ``weights``, ``support`` (an object
    identifying the grid, compared for compatibility) and ``like``.
    """

    __slots__ = ()
    __array_priority__ = 100  # make ndarray <op> NodalFunction defer to us

    def like(self, values):
        raise NotImplementedError

    def _operand(self, other):
        if isinstance(other, NodalFunction):
            check_same_support(self, other)
            return other.values
        if np.isscalar(other):
            return float(other)
        return NotImplemented

    def __add__(self, other):
        o = self._operand(other)
        return NotImplemented if o is NotImplemented else self.like(self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._operand(other)
        return NotImplemented if o is NotImplemented else self.like(self.values - o)

    def __rsub__(self, other):
        o = self._operand(other)
        return NotImplemented if o is NotImplemented else self.like(o - self.values)

    def __mul__(self, other):
        if not np.isscalar(other):
            return NotImplemented
        return self.like(self.values * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not np.isscalar(other):
            return NotImplemented
        return self.like(self.values / float(other))

    def __neg__(self):
        return self.like(-self.values)

    def map(self, fn):
        """Apply a vectorised function nodewise."""
        return self.like(fn(self.values))

    def positive_part(self):
        return self.like(np.maximum(self.values, 0.0))

    def negative_part(self):
        return self.like(np.maximum(-self.values, 0.0))

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())


class GridFunction(NodalFunction):
    """Nodal values on a :class:`Domain1D`."""

    __slots__ = ("domain", "values")

    def __init__(self, domain, values):
        self.domain = domain
        self.values = _as_array(values, (domain.size,))

    @classmethod
    def constant(cls, domain, c):
        return cls(domain, np.full(domain.size, float(c)))

    @classmethod
    def zeros(cls, domain):
        return cls.constant(domain, 0.0)

    @classmethod
    def from_function(cls, domain, fn):
        return cls(domain, fn(domain.nodes))

    @property
    def support(self):
        return self.domain

    @property
    def weights(self):
        return self.domain.weights

    @property
    def x(self):
        return self.domain.nodes

    def like(self, values):
        return GridFunction(self.domain, values)

    def __float__(self):
        if self.values.size != 1:
            raise TypeError("only single-node grid functions convert to float")
        return float(self.values[0])

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"GridFunction({self.domain.kind}, n={self.values.size}, values={self.values!r})"


class _Top:
    """The largest obstacle; comparing anything against it always succeeds."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TOP"

    def __reduce__(self):
        return (_Top, ())


TOP = _Top()


def is_top(p):
    return p is TOP


def check_same_support(a, b):
    if type(a) is not type(b) or a.support != b.support:
        raise DomainMismatchError("functions are defined on different grids")


def check_obstacle(p, support=None):
    """Validate an extended obstacle: TOP or a nonnegative nodal function."""
    if is_top(p):
        return p
    if not isinstance(p, NodalFunction):
        raise PreconditionError("obstacle must be TOP or a grid function")
    if support is not None and p.support != support:
        raise DomainMismatchError("obstacle is defined on a different grid")
    if np.any(p.values < 0):
        raise PreconditionError("finite obstacles must be nonnegative")
    return p


def le(a, b, tol=0.0):
    """True iff a <= b + tol at every node."""
    check_same_support(a, b)
    if tol < 0:
        raise PreconditionError("tol must be nonnegative")
    return bool(np.all(a.values <= b.values + tol))


def parse_exponent(q):
    if isinstance(q, str):
        q = q.strip().lower()
        q = math.inf if q in ("inf", "infinity", "oo") else float(q)
    q = float(q)
    if math.isnan(q) or q < 1:
        raise PreconditionError("exponent q must lie in [1, inf]")
    return q


def norm(v, q=2):
    """Weighted discrete L^q norm; q = inf gives the max norm."""
    q = parse_exponent(q)
    a = np.abs(v.values)
    top = float(a.max()) if a.size else 0.0
    if math.isinf(q) or top == 0.0:
        return top
    # scaled by the max entry so that tiny values do not underflow in a**q
    return top * float(np.sum(v.weights * (a / top) ** q) ** (1.0 / q))


def meet(a, b):
    check_same_support(a, b)
    return a.like(np.minimum(a.values, b.values))


def join(a, b):
    check_same_support(a, b)
    return a.like(np.maximum(a.values, b.values))


def obstacle_le(a, p, tol=0.0):
    """a <= p + tol, where p may be TOP."""
    if is_top(p):
        return True
    return le(a, p, tol)


def dist(a, b, q=math.inf):
    return norm(a - b, q)


@dataclass(frozen=True)
class Tolerances:
    """Stopping and comparison tolerances.

    ``tol_order`` is the slack for exact-level order comparisons,
    ``tol_fixed_point`` stops the outer monotone iteration and
    ``tol_inner`` stops inner obstacle solves.
    """

    tol_order: float = 1e-10
    tol_fixed_point: float = 1e-8
    tol_inner: float = 1e-10
    max_outer: int = 10000
    max_inner: int = 200000

    def __post_init__(self):
        if self.tol_order < 0:
            raise PreconditionError("tol_order must be nonnegative")
        if not (0 < self.tol_inner <= self.tol_fixed_point <= 1):
            raise PreconditionError("tolerances must satisfy 0 < tol_inner <= tol_fixed_point <= 1")
        if self.max_outer < 1 or self.max_inner < 1:
            raise PreconditionError("iteration limits must be positive")

    @classmethod
    def scalar_default(cls):
        return cls()

    @classmethod
    def pde_default(cls):
        # outer stop as tight as the inner one, so that m(u) and M(u) can be
        # told apart at the solver slack
        return cls(tol_fixed_point=1e-10, tol_inner=1e-10)

    @property
    def solver_slack(self):
        """Slack for order checks on quantities produced by iterative solves."""
        return 10 * self.tol_inner

    def refined(self, factor=1e-6, floor=1e-16):
        """Much tighter stopping tolerances, used where solves are differenced."""
        inner = max(floor, self.tol_inner * factor)
        return replace(self, tol_inner=inner, tol_fixed_point=inner,
                       max_outer=max(self.max_outer, 10000))
