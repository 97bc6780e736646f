"""
Scalar models: many solutions, and a derivative the linearization misses
=========================================================================

The smallest setting has one node. S(p, u) = min(p, u) and the obstacle
map is a fixed scalar function, so every quantity below can be checked by
hand. Three obstacle maps ship with the package.
"""

import numpy as np

from qvilab import ScalarProblem, phi_scalar, solve_maximal, solve_minimal
from qvilab.errors import AssumptionRefusal
from qvilab.sensitivity import directional_derivative, psi_directional_derivative, solve_linearized_smallest

s = np.linspace(-1, 3, 9)
for v in "ABC":
    print(v, np.round(phi_scalar(s, v), 3))

# Map A is tangent to the identity on [0, 1], so every point of that interval
# solves y = min(Phi(y), u). The monotone iterations find the two ends.
A = ScalarProblem("A")
for u in (0.3, 0.7, 2.0):
    m, M = solve_minimal(A, u), solve_maximal(A, u)
    print(f"A  u={u}: m={float(m.value)}  M={float(M.value)}  ({M.iterations} steps)")

# Map B is flat outside [1, 2]; the set of solutions is [min(u, 1), min(u, 2)].
B = ScalarProblem("B")
print("B  u=1.5:", float(solve_minimal(B, 1.5).value), float(solve_maximal(B, 1.5).value))

# Map C is concave and positive at zero, which forces a single solution.
C = ScalarProblem("C")
print("C  u=3 unique:", float(solve_minimal(C, 3.0).value), float(solve_maximal(C, 3.0).value))

# %%
# Directional derivatives of the largest solution come from monotone
# difference quotients. For A, M(u) = min(u, 1).
for u, h in [(0.5, 1), (1.0, 1), (1.0, -1), (2.0, 1)]:
    est = directional_derivative(A, u, h)
    print(f"M'({u}; {h:+}) = {float(est.derivative):+.3f} from {len(est.quotients)} quotients")

# %%
# For map A the linearized equation zeta = Psi'(zeta) is satisfied by every
# zeta at the solution y = 1, u = 2, so it cannot single out the derivative.
for zeta in (-1.0, 0.0, 2.0):
    print("Psi'(zeta) at zeta =", zeta, "->", float(psi_directional_derivative(A, 1.0, 2.0, zeta, 0.0)))
try:
    solve_linearized_smallest(A, 2.0, 1.0)
except AssumptionRefusal as exc:
    print("refused:", exc)

# For map C the smallest linearized solution is the derivative.
for u in (0.5, 1.5, 3.0):
    d = float(directional_derivative(C, u, 1.0).derivative)
    z = float(solve_linearized_smallest(C, u, 1.0))
    print(f"C  u={u}: derivative {d:+.3f}, smallest linearized solution {z:+.3f}")
