"""Compiled inner loops: projected SOR sweeps and implicit-Euler marching.

Tridiagonal systems are passed as three arrays: ``lower[i]`` multiplies
y[i-1] in row i, ``upper[i]`` multiplies y[i+1]. The nonlinearity is
encoded as (kind, gamma, xs, ys) with kind 0 = zero, 1 = gamma*max(s, 0),
2 = piecewise-linear table through (xs, ys).
"""
import numpy as np
from numba import njit

F_ZERO = 0
F_RELU = 1
F_TABLE = 2

_RING = 11  # window for the contraction-rate estimate
_ROUNDOFF = 32 * 2.220446049250313e-16  # relative to max |y|


@njit(cache=True)
def _table(s, xs, ys):
    n = xs.size
    if s <= xs[0]:
        k = 0
    elif s >= xs[n - 1]:
        k = n - 2
    else:
        k = np.searchsorted(xs, s) - 1
    slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
    return ys[k] + slope * (s - xs[k])


@njit(cache=True)
def f_eval(s, kind, gamma, xs, ys):
    if kind == F_ZERO:
        return 0.0
    if kind == F_RELU:
        return gamma * s if s > 0.0 else 0.0
    return _table(s, xs, ys)


@njit(cache=True)
def nodal_solve(d, r, kind, gamma, xs, ys):
    """Solve d*y + f(y) = r for y (f nondecreasing, f(0) = 0)."""
    if kind == F_ZERO:
        return r / d
    if kind == F_RELU:
        return r / (d + gamma) if r > 0.0 else r / d
    if r >= 0.0:
        lo, hi = 0.0, r / d
    else:
        lo, hi = r / d, 0.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if d * mid + _table(mid, xs, ys) > r:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@njit(cache=True)
def residual(lower, diag, upper, rhs, bound, y, kind, gamma, xs, ys):
    """max_i |min((rhs - A y - f(y))_i / diag_i, bound_i - y_i)|."""
    n = y.size
    res = 0.0
    for i in range(n):
        r = rhs[i] - diag[i] * y[i] - f_eval(y[i], kind, gamma, xs, ys)
        if i > 0:
            r -= lower[i] * y[i - 1]
        if i < n - 1:
            r -= upper[i] * y[i + 1]
        c = min(r / diag[i], bound[i] - y[i])
        res = max(res, abs(c))
    return res


@njit(cache=True)
def sweep(lower, diag, upper, rhs, bound, y, kind, gamma, xs, ys, omega):
    n = y.size
    diff = 0.0
    for i in range(n):
        r = rhs[i]
        if i > 0:
            r -= lower[i] * y[i - 1]
        if i < n - 1:
            r -= upper[i] * y[i + 1]
        z = nodal_solve(diag[i], r, kind, gamma, xs, ys)
        new = y[i] + omega * (z - y[i])
        if new > bound[i]:
            new = bound[i]
        diff = max(diff, abs(new - y[i]))
        y[i] = new
    return diff


@njit(cache=True)
def pgs_solve(lower, diag, upper, rhs, bound, y, kind, gamma, xs, ys, omega, tol, max_sweeps):
    """Projected SOR in place on y.

    Stops once the successive difference, the extrapolated distance to the
    limit (from the observed contraction rate) and the residual are all
    <= tol, or at the rounding floor of y when tol is below it. Returns (sweeps, converged, last difference, residual).
    """
    ring = np.zeros(_RING)
    diff = np.inf
    for k in range(1, max_sweeps + 1):
        diff = sweep(lower, diag, upper, rhs, bound, y, kind, gamma, xs, ys, omega)
        ring[k % _RING] = diff
        # below a few ulps of |y| sweeps only shuffle rounding errors
        floor = _ROUNDOFF * np.max(np.abs(y))
        stop = max(tol, floor)
        if diff > stop:
            continue
        if diff <= floor:
            est = diff
        elif k > _RING:
            old = ring[(k + 1) % _RING]
            rate = (diff / old) ** (1.0 / (_RING - 1)) if old > 0.0 else 0.0
            rate = min(rate, 1.0 - 1e-6)
            est = diff * rate / (1.0 - rate)
        else:
            est = 9.0 * diff
        if est > stop:
            continue
        res = residual(lower, diag, upper, rhs, bound, y, kind, gamma, xs, ys)
        if res <= stop:
            return k, True, diff, res
    res = residual(lower, diag, upper, rhs, bound, y, kind, gamma, xs, ys)
    return max_sweeps, False, diff, res


@njit(cache=True)
def implicit_euler_march(lower, diag, upper, inv_dt, loads, bound, traj, warm,
                         kind, gamma, xs, ys, omega, tol, max_sweeps):
    """March the stepwise obstacle problem forward in time, in place on traj.

    Row k of ``loads`` is the load at step k; traj[0] is the initial state.
    With ``warm`` the incoming traj[k] is used as the initial guess,
    otherwise the previous slice is. Returns (failed step or 0, worst residual).
    """
    n_steps = traj.shape[0] - 1
    worst = 0.0
    for k in range(1, n_steps + 1):
        rhs = traj[k - 1] * inv_dt + loads[k]
        y = traj[k]
        if not warm:
            y[:] = traj[k - 1]
        sweeps, ok, diff, res = pgs_solve(lower, diag, upper, rhs, bound, y,
                                          kind, gamma, xs, ys, omega, tol, max_sweeps)
        worst = max(worst, res)
        if not ok:
            return k, res
    return 0, worst


@njit(cache=True)
def suffix_min(a):
    out = np.empty_like(a)
    m = np.inf
    for i in range(a.size - 1, -1, -1):
        if a[i] < m:
            m = a[i]
        out[i] = m
    return out


@njit(cache=True)
def shift_min(y, c0):
    """out_i = min_{j >= 0, i + j < n} c0[j] + y[i + j] (quadratic brute force)."""
    n = y.size
    out = np.empty(n)
    for i in range(n):
        m = np.inf
        for j in range(n - i):
            v = c0[j] + y[i + j]
            if v < m:
                m = v
        out[i] = m
    return out
