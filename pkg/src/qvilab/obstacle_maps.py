"""Obstacle maps Phi: three scalar maps, the impulse min-plus map and the heat map."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import PreconditionError
from .lattice import DIRICHLET, GridFunction
from .parabolic import SpaceTimeFunction, solve_heat


class ScalarPhiVariant(enum.Enum):
    """Scalar obstacle maps on the real line.

    * A: 0 for s < 0, s on [0, 1], 2 - 1/s for s > 1 (tangent to the
      identity at 1, so every point of [0, 1] is a fixed point);
    * B: 1 for s < 1, s on [1, 2], 2 for s > 2;
    * C: max(0, min(1 + s/2, 2)), concave on [-2, inf) with C(0) = 1.
    """

    A = "A"
    B = "B"
    C = "C"

    def __call__(self, s):
        return phi_scalar(s, self)

    @property
    def concave_on_nonnegatives(self):
        return self is not ScalarPhiVariant.B


def phi_scalar(v, variant):
    """Evaluate a scalar obstacle map; works on floats and arrays."""
    variant = ScalarPhiVariant(variant)
    s = np.asarray(v, dtype=float)
    if variant is ScalarPhiVariant.A:
        with np.errstate(divide="ignore"):
            tail = 2.0 - 1.0 / np.where(s > 1, s, 1.0)
        out = np.where(s < 0, 0.0, np.where(s <= 1, s, tail))
    elif variant is ScalarPhiVariant.B:
        out = np.clip(s, 1.0, 2.0)
    else:
        out = np.maximum(0.0, np.minimum(1.0 + 0.5 * s, 2.0))
    return float(out) if out.ndim == 0 else out


def phi_gap(s, variant):
    """Phi(s) - s, evaluated without cancellation near tangency points."""
    variant = ScalarPhiVariant(variant)
    s = float(s)
    if variant is ScalarPhiVariant.A:
        if s < 0:
            return -s
        if s <= 1:
            return 0.0
        return -((s - 1.0) ** 2) / s
    if variant is ScalarPhiVariant.B:
        if s < 1:
            return 1.0 - s
        return 0.0 if s <= 2 else 2.0 - s
    if s < -2:
        return -s
    return 1.0 - 0.5 * s if s <= 2 else 2.0 - s


def phi_scalar_derivative(s, ds, variant, kink_tol=0.0):
    """One-sided directional derivative Phi'(s; ds).

    Points within ``kink_tol`` of a kink are treated as sitting on it.
    """
    variant = ScalarPhiVariant(variant)
    s, ds = float(s), float(ds)

    def near(k):
        return abs(s - k) <= kink_tol

    if variant is ScalarPhiVariant.A:
        if near(0.0):
            return max(ds, 0.0)
        if s < 0:
            return 0.0
        if s <= 1 or near(1.0):
            return ds
        return ds / (s * s)
    if variant is ScalarPhiVariant.B:
        lo, hi, slope = 1.0, 2.0, 1.0
    else:
        lo, hi, slope = -2.0, 2.0, 0.5
    if near(lo):
        return slope * max(ds, 0.0)
    if near(hi):
        return slope * min(ds, 0.0)
    if lo < s < hi:
        return slope * ds
    return 0.0


@dataclass(frozen=True)
class ImpulseConfig:
    """Fixed cost ``kappa`` and sampled shift cost ``c0[j]`` at shift j*h."""

    kappa: float
    c0: tuple

    def __init__(self, kappa, c0):
        kappa = float(kappa)
        if not kappa >= 0:
            raise PreconditionError("kappa must be >= 0")
        arr = np.asarray(c0, dtype=float).ravel()
        if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise PreconditionError("c0 must be a nonempty table of finite nonnegative values")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "c0", tuple(arr.tolist()))

    @classmethod
    def zero_cost(cls, kappa, n):
        return cls(kappa, np.zeros(n))

    @classmethod
    def from_file(cls, kappa, path):
        """Read c0 from a text file holding one value per line."""
        return cls(kappa, np.loadtxt(path, dtype=float, ndmin=1))

    @property
    def c0_array(self):
        return np.array(self.c0)

    @property
    def zero_shift_cost(self):
        return not any(self.c0)


def theta_impulse(y, cfg, tol_order=1e-10, fast=None):
    """Theta(y)_i = kappa + min over shifts j >= 0 with i + j interior of c0[j] + y[i + j].

    ``fast`` selects the suffix-minimum path (valid only for c0 = 0);
    by default it is used whenever c0 vanishes.
    """
    if y.domain.kind != DIRICHLET:
        raise PreconditionError("impulse map acts on Dirichlet grid functions")
    n = y.domain.size
    if y.min() < -cfg.kappa - tol_order:
        raise PreconditionError("Theta is undefined below -kappa")
    if len(cfg.c0) < n:
        raise PreconditionError(f"c0 table has {len(cfg.c0)} entries, grid needs {n}")
    vals = np.ascontiguousarray(y.values, dtype=float)
    if fast is None:
        fast = cfg.zero_shift_cost
    if fast:
        if not cfg.zero_shift_cost:
            raise PreconditionError("suffix-minimum path requires c0 = 0")
        m = K.suffix_min(vals)
    else:
        m = K.shift_min(vals, cfg.c0_array[:n])
    return GridFunction(y.domain, np.maximum(cfg.kappa + m, 0.0))


def phi_truncated_impulse(v, cfg, fast=None):
    """Theta(max(-kappa, v)), defined for every grid function."""
    clipped = v.map(lambda a: np.maximum(a, -cfg.kappa))
    return theta_impulse(clipped, cfg, fast=fast)


def phi_heat(y, g, grid):
    """w(T) for w_t - w_xx = g(y), w = 0 on the boundary, w(0) = 0.

    ``y`` lives on the Neumann nodes; the source uses its interior
    values and the result is extended by zero to the boundary nodes.
    """
    if not isinstance(y, SpaceTimeFunction) or y.grid != grid or y.space != grid.space:
        raise PreconditionError("state must be a trajectory on the grid's Neumann nodes")
    source = SpaceTimeFunction(grid, g(y.values[:, 1:-1]), grid.interior)
    w = solve_heat(source, grid).final.values
    out = np.zeros(grid.space.size)
    out[1:-1] = np.maximum(w, 0.0)
    return GridFunction(grid.space, out)
