"""Extremal solutions and sensitivity of discrete quasi-variational inequalities."""
from .elliptic import EllipticOperator, Nonlinearity, residual_vi, solve_obstacle
from .engine import (MAXIMAL, MINIMAL, ImpulseProblem, ParabolicProblem, ProblemInstance,
                     QviSolution, ScalarProblem, apply_T, check_uniqueness, is_subsolution,
                     is_supersolution, solve_maximal, solve_minimal)
from .errors import (AssumptionRefusal, ConfigError, ConvergenceError, DomainMismatchError,
                     MonotonicityError, PreconditionError, QviError)
from .harness import load_problem, run
from .lattice import (TOP, Domain1D, GridFunction, Tolerances, dist, join, le, meet, norm,
                      obstacle_le)
from .obstacle_maps import (ImpulseConfig, ScalarPhiVariant, phi_heat, phi_scalar,
                            phi_truncated_impulse, theta_impulse)
from .parabolic import (BoundaryControl, HeatSource, SpaceTimeFunction, SpaceTimeGrid,
                        solve_heat, solve_parabolic_obstacle)
from .sensitivity import (TauSchedule, characterization_check, concavity_check,
                          directional_derivative, hadamard_check, lipschitz_certificate,
                          psi_directional_derivative, solve_linearized_smallest)

__version__ = "0.1.0"
