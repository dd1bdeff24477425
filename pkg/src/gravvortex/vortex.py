"""Abelian vortex equation at a fixed background metric.

In conformal form the unknown is ``f`` with ``h' = e^{2f} h`` and

    laplacian(f) + (e^{2f} |phi|^2 - tau) / 2 + 2 pi N / volume = 0.

Its linearization ``laplacian + e^{2f}|phi|^2`` is symmetric positive definite,
so Newton steps are always well defined.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._spectral import multiplication_matrix
from .errors import ConfigurationError, NoSolutionExists
from .geometry import ScalarField, SurfaceGrid
from .newton import damped_newton
from .sections import SectionField


def bradlow_gate(N: int, tau: float, volume: float) -> bool:
    """Strict inequality ``4 pi N < tau * volume``."""
    if N < 1 or not tau > 0 or not volume > 0:
        raise ConfigurationError("bradlow_gate needs N >= 1, tau > 0 and volume > 0")
    return 4 * math.pi * N < tau * volume


@dataclass(frozen=True, eq=False)
class VortexProblem:
    grid: SurfaceGrid
    section: SectionField
    tau: float
    tolerance: float = 1e-10
    max_iterations: int = 100

    def __post_init__(self):
        if not self.section.grid.same_as(self.grid):
            raise ConfigurationError("section was built on a different grid")
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if not 0 < self.tolerance < 1e-4:
            raise ConfigurationError("tolerance must lie in (0, 1e-4)")

    @property
    def degree(self) -> int:
        return self.section.degree

    @property
    def volume(self) -> float:
        return self.grid.volume

    @property
    def flux(self) -> float:
        """Value of ``integral(e^{2f}|phi|^2)`` forced by integrating the equation."""
        return self.tau * self.volume - 4 * math.pi * self.degree


@dataclass(frozen=True, eq=False)
class VortexSolution:
    f: ScalarField
    residual_norm: float
    iterations: int
    flux_defect: float
    coeffs: np.ndarray = field(repr=False)
    history: list = field(default_factory=list, repr=False)


def vortex_residual_coeffs(problem: VortexProblem, c: np.ndarray) -> np.ndarray:
    grid = problem.grid
    basis = grid.basis
    f_fine = basis.synth(c, fine=True)
    nonlinear = 0.5 * (np.exp(2 * f_fine) * problem.section.fine_density - problem.tau)
    r = basis.eigenvalues * c + basis.analyze(nonlinear, fine=True)
    r[0] += 2 * math.pi * problem.degree / problem.volume * math.sqrt(problem.volume)
    return r


def vortex_jacobian_coeffs(problem: VortexProblem, c: np.ndarray) -> np.ndarray:
    basis = problem.grid.basis
    weight = np.exp(2 * basis.synth(c, fine=True)) * problem.section.fine_density
    return np.diag(basis.eigenvalues) + multiplication_matrix(basis, weight)


def constant_guess(problem: VortexProblem) -> float:
    """Constant ``f`` whose flux ``integral(e^{2f}|phi|^2)`` has the required value."""
    total = float(np.sum(problem.section.fine_density * problem.grid.fine_weights))
    return 0.5 * math.log(problem.flux) - 0.5 * math.log(total)


def check_existence(problem) -> None:
    """Raise ``NoSolutionExists`` unless ``4 pi N < tau Vol`` and the section is nonzero."""
    N = problem.degree
    if N >= 1 and not bradlow_gate(N, problem.tau, problem.volume):
        raise NoSolutionExists(
            f"strict bound 4*pi*N < tau*Vol fails: 4*pi*N = {4 * math.pi * N:.12g}, "
            f"tau*Vol = {problem.tau * problem.volume:.12g}",
            four_pi_n=4 * math.pi * N, tau_volume=problem.tau * problem.volume)
    if N == 0 and not problem.tau > 0:
        raise NoSolutionExists("tau must be positive")
    if not np.any(problem.section.fine_density > 0):
        raise ConfigurationError("section density vanishes identically")


def solve_vortex(problem: VortexProblem, initial: ScalarField | str | None = None) -> VortexSolution:
    """Damped Newton solve; ``initial`` may be a field, ``"zero"`` or None (constant guess)."""
    check_existence(problem)
    N = problem.degree
    grid = problem.grid
    if initial is None:
        c0 = grid.basis.constant_coefficient(constant_guess(problem))
    elif isinstance(initial, str):
        if initial != "zero":
            raise ConfigurationError(f"unknown initialization {initial!r}")
        c0 = np.zeros(grid.ncoeffs)
    else:
        c0 = initial.coeffs()
    max_iter = problem.max_iterations
    if N >= 1 and problem.flux < 0.05 * 4 * math.pi * N:
        max_iter = max(max_iter, 500)
        warnings.warn("tau*Vol is close to the Bradlow bound; convergence may be slow",
                      RuntimeWarning, stacklevel=2)
    res = damped_newton(lambda c: vortex_residual_coeffs(problem, c),
                        lambda c: vortex_jacobian_coeffs(problem, c),
                        c0, tol=problem.tolerance, max_iter=max_iter)
    sol = VortexSolution(grid.field_from_coeffs(res.x), res.residual_norm, res.iterations,
                         0.0, res.x, res.history)
    object.__setattr__(sol, "flux_defect", flux_identity_check(sol, problem))
    return sol


def flux_identity_check(solution: VortexSolution, problem: VortexProblem) -> float:
    """``|integral(e^{2f}|phi|^2) - (tau Vol - 4 pi N)|`` on the padded grid."""
    basis = problem.grid.basis
    f_fine = basis.synth(solution.coeffs, fine=True)
    flux = float(np.sum(np.exp(2 * f_fine) * problem.section.fine_density * problem.grid.fine_weights))
    return abs(flux - problem.flux)
