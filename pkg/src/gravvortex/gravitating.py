"""Coupled gravitating vortex system in conformal (Kazdan-Warner) form.

With ``omega' = e^{2u} omega``, ``h' = e^{2f} h`` and ``p = e^{2f}|phi|^2`` the
unknowns solve

    r1 = laplacian(f) + e^{2u} (p - tau) / 2 + 2 pi N / Vol = 0
    r2 = laplacian(u + alpha p - 2 alpha tau f) + c (1 - e^{2u}) = 0

with the topological constant ``c = 2 pi (chi - 2 alpha tau N) / Vol``.
Everything is discretized in coefficient space; the residuals reported are L2
norms of the Galerkin-projected residual fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from ._spectral import multiplication_matrix
from .errors import ConfigurationError, ConvergenceFailure, SingularJacobian
from .geometry import ScalarField, SurfaceGrid
from .newton import damped_newton, smallest_singular
from .sections import SectionField
from .vortex import VortexProblem, check_existence, constant_guess, solve_vortex


def compute_c(alpha: float, tau: float, N: int, chi: int, volume: float) -> float:
    if not volume > 0:
        raise ConfigurationError("volume must be positive")
    return 2 * math.pi * (chi - 2 * alpha * tau * N) / volume


@dataclass(frozen=True, eq=False)
class GravProblem:
    grid: SurfaceGrid
    section: SectionField
    tau: float
    alpha: float = 0.0
    tolerance: float = 1e-10
    max_iterations: int = 60
    kernel_projection: bool = False
    singular_tol: float = 1e-6

    def __post_init__(self):
        if not self.section.grid.same_as(self.grid):
            raise ConfigurationError("section was built on a different grid")
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if not math.isfinite(self.alpha):
            raise ConfigurationError("alpha must be finite")
        if self.kernel_projection and self.grid.genus != 0:
            raise ConfigurationError("kernel projection only applies on the sphere")
        if not np.any(self.section.fine_density > 0):
            raise ConfigurationError("section density vanishes identically")

    @property
    def degree(self) -> int:
        return self.section.degree

    @property
    def volume(self) -> float:
        return self.grid.volume

    @property
    def c(self) -> float:
        return compute_c(self.alpha, self.tau, self.degree, self.grid.euler_characteristic,
                         self.volume)

    @property
    def volume_gauge(self) -> bool:
        """True when ``c`` vanishes and the mean of ``r2`` is identically zero."""
        return abs(self.c) * self.volume < 1e-13

    def with_alpha(self, alpha: float) -> "GravProblem":
        return replace(self, alpha=float(alpha))


@dataclass(frozen=True, eq=False)
class GravSolution:
    u: ScalarField
    f: ScalarField
    residual_norms: tuple
    conformal_volume: float
    alpha: float
    coeffs: np.ndarray = field(repr=False)
    iterations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def u_coeffs(self) -> np.ndarray:
        return self.coeffs[: self.coeffs.size // 2]

    @property
    def f_coeffs(self) -> np.ndarray:
        return self.coeffs[self.coeffs.size // 2:]


# ----- discrete operators -----------------------------------------------------

def _split(problem: GravProblem, x: np.ndarray):
    M = problem.grid.ncoeffs
    return x[:M], x[M:]


def _fine_state(problem: GravProblem, x: np.ndarray):
    basis = problem.grid.basis
    cu, cf = _split(problem, x)
    eu = np.exp(2 * basis.synth(cu, fine=True))
    p = np.exp(2 * basis.synth(cf, fine=True)) * problem.section.fine_density
    return cu, cf, eu, p


def residual_coeffs(problem: GravProblem, x: np.ndarray) -> np.ndarray:
    """Stacked Galerkin coefficients of (r1, r2)."""
    basis = problem.grid.basis
    lam = basis.eigenvalues
    cu, cf, eu, p = _fine_state(problem, x)
    a, tau, V = problem.alpha, problem.tau, problem.volume
    r1 = lam * cf + basis.analyze(0.5 * eu * (p - tau), fine=True)
    r1[0] += 2 * math.pi * problem.degree / V * math.sqrt(V)
    r2 = lam * (cu + a * basis.analyze(p, fine=True) - 2 * a * tau * cf)
    r2 = r2 + problem.c * basis.analyze(1 - eu, fine=True)
    return np.concatenate([r1, r2])


def jacobian_coeffs(problem: GravProblem, x: np.ndarray) -> np.ndarray:
    """Dense Frechet derivative of ``residual_coeffs`` with respect to (u, f) coefficients."""
    basis = problem.grid.basis
    lam = np.diag(basis.eigenvalues)
    cu, cf, eu, p = _fine_state(problem, x)
    a, tau, c = problem.alpha, problem.tau, problem.c
    M = basis.size
    J = np.empty((2 * M, 2 * M))
    J[:M, :M] = multiplication_matrix(basis, eu * (p - tau))
    J[:M, M:] = lam + multiplication_matrix(basis, eu * p)
    J[M:, :M] = lam - 2 * c * multiplication_matrix(basis, eu)
    J[M:, M:] = basis.eigenvalues[:, None] * multiplication_matrix(basis, 2 * a * (p - tau))
    return J


def alpha_derivative_coeffs(problem: GravProblem, x: np.ndarray) -> np.ndarray:
    """Partial derivative of the residual with respect to the coupling."""
    basis = problem.grid.basis
    cu, cf, eu, p = _fine_state(problem, x)
    dc = -4 * math.pi * problem.tau * problem.degree / problem.volume
    d2 = basis.eigenvalues * (basis.analyze(p, fine=True) - 2 * problem.tau * cf)
    d2 = d2 + dc * basis.analyze(1 - eu, fine=True)
    return np.concatenate([np.zeros(basis.size), d2])


def _volume_row(problem: GravProblem, x: np.ndarray):
    basis = problem.grid.basis
    cu, _ = _split(problem, x)
    eu = np.exp(2 * basis.synth(cu, fine=True))
    V = problem.volume
    value = (float(np.sum(eu * problem.grid.fine_weights)) - V) / math.sqrt(V)
    grad = 2 * basis.analyze(eu, fine=True) / math.sqrt(V)
    return value, grad


def _system(problem: GravProblem):
    """Residual, Jacobian and index sets of the square system handed to Newton."""
    M = problem.grid.ncoeffs
    gauge = problem.volume_gauge

    def res(x):
        r = residual_coeffs(problem, x)
        if gauge:
            r[M] = _volume_row(problem, x)[0]
        return r

    def jac(x):
        J = jacobian_coeffs(problem, x)
        if gauge:
            J[M, :] = 0.0
            J[M, :M] = _volume_row(problem, x)[1]
        return J

    eqs = np.arange(2 * M)
    unk = np.arange(2 * M)
    if problem.kernel_projection:
        deg1 = np.flatnonzero(problem.grid.basis.degree == 1)
        unk = np.setdiff1d(unk, deg1)
        eqs = np.setdiff1d(eqs, M + deg1)
    return res, jac, eqs, unk


def residual(u: ScalarField, f: ScalarField, problem: GravProblem) -> tuple[ScalarField, ScalarField]:
    """Residual fields (r1, r2) of the band-limited projections of ``u`` and ``f``."""
    grid = problem.grid
    x = np.concatenate([u.coeffs(), f.coeffs()])
    r = residual_coeffs(problem, x)
    M = grid.ncoeffs
    return grid.field_from_coeffs(r[:M]), grid.field_from_coeffs(r[M:])


class GravLinearization:
    """Frechet derivative of the residual at a point, acting on field pairs."""

    def __init__(self, problem: GravProblem, x: np.ndarray):
        self.problem = problem
        self.point = np.array(x)
        self.matrix = jacobian_coeffs(problem, x)

    def apply_coeffs(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def apply(self, du: ScalarField, df: ScalarField) -> tuple[ScalarField, ScalarField]:
        grid = self.problem.grid
        out = self.apply_coeffs(np.concatenate([du.coeffs(), df.coeffs()]))
        M = grid.ncoeffs
        return grid.field_from_coeffs(out[:M]), grid.field_from_coeffs(out[M:])

    def block(self, row: int, col: int) -> np.ndarray:
        M = self.problem.grid.ncoeffs
        return self.matrix[row * M:(row + 1) * M, col * M:(col + 1) * M]


def linearize(u: ScalarField, f: ScalarField, problem: GravProblem) -> GravLinearization:
    return GravLinearization(problem, np.concatenate([u.coeffs(), f.coeffs()]))


def jacobian_near_kernel(problem: GravProblem, x: np.ndarray):
    """Smallest singular value of the full linearization and its (u, f) direction."""
    _, jac, _, _ = _system(replace(problem, kernel_projection=False))
    sigma, vec = smallest_singular(jac(x))
    grid = problem.grid
    M = grid.ncoeffs
    return sigma, (grid.field_from_coeffs(vec[:M]), grid.field_from_coeffs(vec[M:])), vec


def degree_one_fraction(grid: SurfaceGrid, coeffs: np.ndarray) -> float:
    """Share of the squared norm carried by degree-1 spherical harmonics."""
    if grid.genus != 0:
        return 0.0
    sel = grid.basis.degree == 1
    total = float(coeffs @ coeffs)
    return float(coeffs[sel] @ coeffs[sel]) / total if total > 0 else 0.0


def _initial_coeffs(problem: GravProblem, initial):
    grid = problem.grid
    if initial is None:
        vp = VortexProblem(grid, problem.section, problem.tau)
        cf = grid.basis.constant_coefficient(constant_guess(vp))
        return np.concatenate([np.zeros(grid.ncoeffs), cf])
    if isinstance(initial, np.ndarray):
        return np.array(initial, dtype=float)
    u, f = initial
    return np.concatenate([u.coeffs(), f.coeffs()])


def solve_grav(problem: GravProblem, initial=None) -> GravSolution:
    """Newton solve of the coupled system.

    ``initial`` is ``None`` (u = 0 with the constant vortex guess for f), a
    pair of fields or a stacked coefficient vector.  On the sphere without
    kernel projection the smallest singular value of the linearization is
    monitored and ``SingularJacobian`` is raised below ``singular_tol``; the
    error carries the near-kernel pair of fields.
    """
    check_existence(problem)
    grid = problem.grid
    x0 = _initial_coeffs(problem, initial)
    res, jac, eqs, unk = _system(problem)
    M = grid.ncoeffs
    if problem.kernel_projection:
        x0[:M][grid.basis.degree == 1] = 0.0
    monitor = grid.genus == 0 and not problem.kernel_projection
    try:
        out = damped_newton(res, jac, x0, tol=problem.tolerance,
                            max_iter=problem.max_iterations, equations=eqs, unknowns=unk,
                            singular_tol=problem.singular_tol if monitor else None)
    except SingularJacobian as exc:
        if exc.kernel is not None and np.ndim(exc.kernel) == 1:
            vec = exc.kernel
            exc.details["degree_one_fraction_u"] = degree_one_fraction(grid, vec[:M])
            exc.kernel = (grid.field_from_coeffs(vec[:M]), grid.field_from_coeffs(vec[M:]))
        raise
    return _package(problem, out.x, out.iterations, out.history)


def _package(problem: GravProblem, x: np.ndarray, iterations: int = 0, history=None) -> GravSolution:
    grid = problem.grid
    r = residual_coeffs(problem, x)
    M = grid.ncoeffs
    norms = (float(np.linalg.norm(r[:M])), float(np.linalg.norm(r[M:])))
    eu = np.exp(2 * grid.from_coeffs(x[:M], fine=True))
    vol = float(np.sum(eu * grid.fine_weights))
    return GravSolution(grid.field_from_coeffs(x[:M]), grid.field_from_coeffs(x[M:]), norms,
                        vol, problem.alpha, np.array(x), iterations, list(history or []))


def solution_from_coeffs(problem: GravProblem, x: np.ndarray) -> GravSolution:
    """Wrap an externally produced coefficient vector as a solution record."""
    return _package(problem, np.asarray(x, dtype=float))


# ----- continuation -------------------------------------------------------------

@dataclass
class ContinuationPath:
    alphas: list
    solutions: list
    steps: list = field(default_factory=list)
    failure_point: float | None = None
    failure_reason: str | None = None
    continuity_constant: float | None = None

    @property
    def reached(self) -> float:
        return self.alphas[-1]

    def __len__(self) -> int:
        return len(self.alphas)


def _tangent(problem: GravProblem, x: np.ndarray) -> np.ndarray:
    _, jac, eqs, unk = _system(problem)
    J = jac(x)[eqs][:, unk]
    rhs = -alpha_derivative_coeffs(problem, x)
    if problem.volume_gauge:
        rhs[problem.grid.ncoeffs] = 0.0
    out = np.zeros_like(x)
    try:
        out[unk] = sla.solve(J, rhs[eqs])
    except (np.linalg.LinAlgError, ValueError):
        return np.zeros_like(x)
    return out if np.all(np.isfinite(out)) else np.zeros_like(x)


def continue_in_alpha(template: GravProblem, alpha_target: float, initial_step: float = 2e-3,
                      min_step: float = 1e-8, max_steps: int = 400, predictor: bool = True,
                      initial=None) -> ContinuationPath:
    """Natural-parameter continuation in the coupling from zero to ``alpha_target``.

    Steps are halved on failure or on a sup-norm jump exceeding the running
    continuity bound, and grown by 1.5 after fast convergence.  A step below
    ``min_step`` ends the path; the partial path is returned with the failure
    point recorded.
    """
    base = template.with_alpha(0.0)
    if initial is None:
        vp = VortexProblem(base.grid, base.section, base.tau,
                           tolerance=min(base.tolerance, 1e-10))
        vsol = solve_vortex(vp)
        initial = np.concatenate([np.zeros(base.grid.ncoeffs), vsol.coeffs])
    sol = solve_grav(base, initial)
    path = ContinuationPath([0.0], [sol])
    target = float(alpha_target)
    if target == 0.0:
        return path
    sign = 1.0 if target > 0 else -1.0
    step = min(abs(initial_step), abs(target))
    alpha, x = 0.0, sol.coeffs
    bound = None
    for _ in range(max_steps):
        if abs(alpha) >= abs(target):
            break
        trial = alpha + sign * min(step, abs(target - alpha))
        problem = template.with_alpha(trial)
        guess = x + (trial - alpha) * _tangent(template.with_alpha(alpha), x) if predictor else x
        record = {"alpha": trial, "step": abs(trial - alpha)}
        try:
            new = solve_grav(problem, guess)
        except (ConvergenceFailure, SingularJacobian) as exc:
            record.update(accepted=False, reason=type(exc).__name__)
            path.steps.append(record)
            step /= 2
            if step < min_step:
                path.failure_point = trial
                path.failure_reason = type(exc).__name__
                break
            continue
        jump = max(np.abs(new.u.values - path.solutions[-1].u.values).max(),
                   np.abs(new.f.values - path.solutions[-1].f.values).max())
        ratio = jump / abs(trial - alpha)
        if bound is not None and ratio > 4 * bound:
            record.update(accepted=False, reason="continuity")
            path.steps.append(record)
            step /= 2
            if step < min_step:
                path.failure_point = trial
                path.failure_reason = "continuity"
                break
            continue
        bound = ratio if bound is None else max(bound, ratio)
        record.update(accepted=True, iterations=new.iterations, jump=jump)
        path.steps.append(record)
        path.alphas.append(trial)
        path.solutions.append(new)
        alpha, x = trial, new.coeffs
        if new.iterations <= 3:
            step *= 1.5
    path.continuity_constant = bound
    return path
