"""
The elliptic obstacle problem and its free boundary
===================================================

-y'' + f(y) = u on (0, 1), y = 0 at both ends, y <= p. With u = 8 and a
flat obstacle p = 0.75 the exact solution is a parabola on each wing
glued to the obstacle at a = sqrt(0.75) / 2.
"""

import math

import numpy as np

from qvilab import EllipticOperator, GridFunction, Nonlinearity, Tolerances, residual_vi, solve_obstacle
from qvilab.lattice import TOP, Domain1D

tol = Tolerances(tol_fixed_point=1e-10, tol_inner=1e-10)
a = math.sqrt(0.75) / 2

# Without a constraint the 3-point stencil is exact on the quadratic 4x(1 - x).
d = Domain1D(64)
y = solve_obstacle(EllipticOperator(d), TOP, GridFunction.constant(d, 8.0), tol)
print("unconstrained error:", np.max(np.abs(y.values - 4 * d.nodes * (1 - d.nodes))))

for n in (64, 256, 1024):
    d = Domain1D(n)
    op = EllipticOperator(d)
    p, u = GridFunction.constant(d, 0.75), GridFunction.constant(d, 8.0)
    y = solve_obstacle(op, p, u, tol)
    w = np.minimum(d.nodes, 1 - d.nodes)
    exact = np.where(w < a, -4 * w**2 + 8 * a * w, 0.75)
    contact = d.nodes[y.values >= 0.75 - 1e-12]
    print(f"n={n:5d}  sup error {np.max(np.abs(y.values - exact)):.2e}  "
          f"contact starts at {contact.min():.4f} (exact {a:.4f})  residual {residual_vi(op, y, p, u):.1e}")

# %%
# A monotone reaction term f(s) = gamma * max(s, 0) pushes the solution down
# and shrinks the contact set.
d = Domain1D(256)
for gamma in (0.0, 5.0, 20.0):
    op = EllipticOperator(d, Nonlinearity.relu(gamma))
    y = solve_obstacle(op, GridFunction.constant(d, 0.75), GridFunction.constant(d, 8.0), tol)
    print(f"gamma={gamma:4}: max y = {y.max():.4f}, contact nodes = {int(np.sum(y.values >= 0.75 - 1e-12))}")
