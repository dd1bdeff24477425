"""Gravitating vortex solvers on the sphere and flat tori."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, ConvergenceFailure, GravVortexError, GridMismatchError,
                     InvalidDivisorError, NoSolutionExists, OracleRefused, SectionConstructionError,
                     ShootingFailure, SingularJacobian, SolvabilityError)
from .geometry import (ScalarField, SurfaceGrid, integrate, laplacian, make_sphere_grid,
                       make_torus_grid, poisson_solve)
from .sections import (Divisor, SectionField, Stability, StabilityClass, build_section,
                       formal_section, git_classify, hilbert_mumford_oracle)
from .vortex import VortexProblem, VortexSolution, bradlow_gate, solve_vortex
from .gravitating import (ContinuationPath, GravProblem, GravSolution, compute_c,
                          continue_in_alpha, linearize, residual, solve_grav)
from .einstein_bogomolnyi import (EBProblem, EBSolution, YangClass, eb_parameter_check,
                                  radial_ode_oracle, solve_eb, yang_hypothesis_check)
from .reduction import ReducedKYMData, assemble_and_check, compute_lambda, identity_probe
