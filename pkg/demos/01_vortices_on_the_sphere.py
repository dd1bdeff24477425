# %% [markdown]
# # Vortices on a round sphere
#
# A Higgs field with zeros at a handful of points, a constant symmetry
# breaking parameter, and a fixed round metric.  The vortex equation has a
# solution exactly when tau * Vol exceeds 4 pi N.

# %%
import math

import numpy as np

from gravvortex import (Divisor, NoSolutionExists, VortexProblem, build_section,
                        make_sphere_grid, solve_vortex)

grid = make_sphere_grid(24)
divisor = Divisor((0.5 + 0.2j, -1.0j, 2.0 + 0j), (1, 1, 1))
section = build_section(divisor, grid)
N = divisor.degree
print("degree", N, "area", grid.volume)

# %% [markdown]
# Sweep tau across the bound.  Below it the solver refuses; above it the
# flux of the rescaled Higgs density is tau * Vol - 4 pi N on the nose.

# %%
for factor in (0.9, 1.0, 1.05, 2.0, 10.0):
    tau = factor * 4 * math.pi * N / grid.volume
    try:
        sol = solve_vortex(VortexProblem(grid, section, tau))
    except NoSolutionExists as exc:
        print(f"tau*Vol/(4 pi N) = {factor:5.2f}: no solution ({exc})")
        continue
    higgs = np.exp(2 * sol.f.values) * section.density.values
    print(f"tau*Vol/(4 pi N) = {factor:5.2f}: {sol.iterations:3d} Newton steps, "
          f"residual {sol.residual_norm:.1e}, max |phi|^2 / tau = {higgs.max() / tau:.4f}")

# %% [markdown]
# Far from the zeros the Higgs density approaches its vacuum value tau as
# the area grows: the vortices shrink relative to the surface.
