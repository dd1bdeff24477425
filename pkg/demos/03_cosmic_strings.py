# %% [markdown]
# # Cosmic strings on the sphere
#
# When alpha * tau * N = 1 the topological constant vanishes and the system
# collapses to one equation for f.  Two divisors are tried: the symmetric
# one with half the zeros at each pole, and a stable one with distinct
# points.  The symmetric solution is compared with an independent
# shooting solution of the radial ODE.

# %%
import math

import numpy as np

from gravvortex import Divisor, EBProblem, make_sphere_grid, radial_ode_oracle, solve_eb
from gravvortex.sections import INF

grid = make_sphere_grid(32)
tau = 1.5 * 4 * math.pi * 2 / grid.volume

# %%
sym = EBProblem.build(grid, Divisor((0j, INF), (1, 1)), tau)
sol = solve_eb(sym)
prof = radial_ode_oracle(2, tau, sym.alpha)
gap = np.abs(sol.f.values - prof.at_colatitude(grid.nodes[..., 0])).max()
print(f"symmetric: residual {sol.residual_norm:.1e}, c' {sol.c_prime:.10f}, ODE c' {prof.c_prime:.10f}")
print(f"           sup |f_pde - f_ode| = {gap:.1e}")
print("           conformal factor range", sol.deficit)

# %% [markdown]
# Any two distinct points can be moved to the poles, so a stable example
# needs at least three.

# %%
tau3 = 1.5 * 4 * math.pi * 3 / grid.volume
stable = EBProblem.build(grid, Divisor((0.4 + 0.1j, -1.3j, 2.2 + 0.5j), (1, 1, 1)), tau3)
print("three distinct points:", stable.hypothesis.value)
sol2 = solve_eb(stable)
print(f"residual {sol2.residual_norm:.1e}, conformal area {sol2.conformal_volume:.12f}")

# %% [markdown]
# The conformal factor e^{2u} has its minimum where the strings sit:
# each string carves a conical deficit out of the sphere.
