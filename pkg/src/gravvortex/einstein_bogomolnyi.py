"""The c = 0 case on the sphere (Einstein-Bogomol'nyi / cosmic strings).

When ``alpha * tau * N = 1`` the second gravitating equation integrates to

    u = 2 alpha tau f - alpha e^{2f}|phi|^2 + c'

and the system collapses to one equation for ``f``:

    laplacian(f) + e^{2u} (e^{2f}|phi|^2 - tau) / 2 + 2 pi N / Vol = 0.

The conformal volume of ``e^{2u} omega`` is then free; it is fixed by treating
``c'`` as an unknown together with the constraint ``integral(e^{2u}) = target``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ._spectral import multiplication_matrix
from .errors import (ConfigurationError, ConvergenceFailure, NoSolutionExists,
                     ShootingFailure, SingularJacobian)
from .geometry import ScalarField, SurfaceGrid
from .gravitating import GravProblem, GravSolution, solution_from_coeffs
from .newton import damped_newton
from .sections import (INF, Divisor, SectionField, Stability, build_sphere_section,
                       chordal_distance, git_classify)
from .vortex import bradlow_gate


def eb_parameter_check(alpha: float, tau: float, N: int) -> bool:
    return abs(alpha * tau * N - 1) < 1e-12


class YangClass(str, enum.Enum):
    SYMMETRIC = "Symmetric"
    STABLE = "Stable"
    NEITHER = "Neither"


def yang_hypothesis_check(divisor: Divisor) -> YangClass:
    kind = git_classify(divisor).kind
    if kind is Stability.STRICTLY_POLYSTABLE:
        return YangClass.SYMMETRIC
    if kind is Stability.STABLE:
        return YangClass.STABLE
    return YangClass.NEITHER


def _is_polar(divisor: Divisor) -> bool:
    pts = divisor.points
    has0 = any(chordal_distance(p, 0j) < 1e-12 for p in pts)
    hasinf = any(chordal_distance(p, INF) < 1e-12 for p in pts)
    return len(pts) == 2 and has0 and hasinf


@dataclass(frozen=True, eq=False)
class EBProblem:
    grid: SurfaceGrid
    divisor: Divisor
    section: SectionField
    tau: float
    alpha: float | None = None
    c_prime: float = 0.0
    target_volume: float | None = 2 * math.pi
    tolerance: float = 1e-10
    max_iterations: int = 60

    def __post_init__(self):
        if self.grid.genus != 0:
            raise ConfigurationError("the single-equation reduction needs the sphere")
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        N = self.divisor.degree
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / (self.tau * N))
        elif not eb_parameter_check(self.alpha, self.tau, N):
            raise ConfigurationError(
                f"alpha*tau*N = {self.alpha * self.tau * N!r} differs from 1")
        if self.target_volume is not None and not self.target_volume > 0:
            raise ConfigurationError("target volume must be positive")
        if not self.section.grid.same_as(self.grid):
            raise ConfigurationError("section was built on a different grid")

    @classmethod
    def build(cls, grid: SurfaceGrid, divisor: Divisor, tau: float, **kw) -> "EBProblem":
        return cls(grid, divisor, build_sphere_section(divisor, grid), tau, **kw)

    @property
    def degree(self) -> int:
        return self.divisor.degree

    @property
    def volume(self) -> float:
        return self.grid.volume

    @property
    def hypothesis(self) -> YangClass:
        return yang_hypothesis_check(self.divisor)

    @property
    def parity_gauge(self) -> bool:
        """Symmetric divisor at {0, inf}: restrict to reflection-even modes."""
        return self.hypothesis is YangClass.SYMMETRIC and _is_polar(self.divisor)


@dataclass(frozen=True, eq=False)
class EBSolution:
    f: ScalarField
    u: ScalarField
    residual_norm: float
    conformal_volume: float
    c_prime: float
    deficit: dict
    hypothesis: YangClass
    experimental: bool
    coeffs: np.ndarray = field(repr=False)
    iterations: int = 0
    homotopy: list = field(default_factory=list, repr=False)


def _u_fine(problem: EBProblem, cf: np.ndarray, cp: float, alpha: float):
    basis = problem.grid.basis
    p = np.exp(2 * basis.synth(cf, fine=True)) * problem.section.fine_density
    u = 2 * alpha * problem.tau * basis.synth(cf, fine=True) - alpha * p + cp
    return u, p


def _residual(problem: EBProblem, cf: np.ndarray, cp: float, alpha: float) -> np.ndarray:
    basis = problem.grid.basis
    u, p = _u_fine(problem, cf, cp, alpha)
    r = basis.eigenvalues * cf + basis.analyze(0.5 * np.exp(2 * u) * (p - problem.tau), fine=True)
    r[0] += 2 * math.pi * problem.degree / problem.volume * math.sqrt(problem.volume)
    return r


def _jacobian(problem: EBProblem, cf: np.ndarray, cp: float, alpha: float):
    basis = problem.grid.basis
    u, p = _u_fine(problem, cf, cp, alpha)
    e = np.exp(2 * u)
    tau = problem.tau
    Jf = np.diag(basis.eigenvalues) + multiplication_matrix(basis, e * (p - 2 * alpha * (p - tau) ** 2))
    Jc = basis.analyze(e * (p - tau), fine=True)
    dvol_f = basis.analyze(2 * e * (2 * alpha * tau - 2 * alpha * p), fine=True)
    dvol_c = 2 * float(np.sum(e * problem.grid.fine_weights))
    return Jf, Jc, dvol_f, dvol_c


def eb_residual(f: ScalarField, c_prime: float, problem: EBProblem) -> ScalarField:
    """Galerkin residual field of the single equation."""
    r = _residual(problem, f.coeffs(), c_prime, problem.alpha)
    return problem.grid.field_from_coeffs(r)


def _solve_at(problem: EBProblem, alpha: float, x0: np.ndarray, keep: np.ndarray):
    """Newton on (f coefficients, c') for a given coupling; returns the converged vector."""
    M = problem.grid.ncoeffs
    target = problem.target_volume
    grid = problem.grid

    if target is None:
        def res(x):
            return _residual(problem, x, problem.c_prime, alpha)

        def jac(x):
            return _jacobian(problem, x, problem.c_prime, alpha)[0]
        eqs = unk = keep
    else:
        scale = 1 / math.sqrt(target)

        def res(x):
            cf, cp = x[:M], x[M]
            u, _ = _u_fine(problem, cf, cp, alpha)
            vol = float(np.sum(np.exp(2 * u) * grid.fine_weights))
            return np.concatenate([_residual(problem, cf, cp, alpha), [(vol - target) * scale]])

        def jac(x):
            Jf, Jc, dvf, dvc = _jacobian(problem, x[:M], x[M], alpha)
            J = np.empty((M + 1, M + 1))
            J[:M, :M] = Jf
            J[:M, M] = Jc
            J[M, :M] = dvf * scale
            J[M, M] = dvc * scale
            return J
        eqs = unk = np.concatenate([keep, [M]])
    return damped_newton(res, jac, x0, tol=problem.tolerance, max_iter=problem.max_iterations,
                         equations=eqs, unknowns=unk)


def solve_eb(problem: EBProblem, homotopy_step: float = 0.25, min_step: float = 1e-4) -> EBSolution:
    """Solve the single equation by homotopy in the coupling from 0 to ``1/(tau N)``.

    At zero coupling the equation is a vortex equation on a rescaled round
    metric and Newton converges from a constant guess; the coupling is then
    increased with adaptive steps, each solve starting from a secant predictor.
    """
    N, tau, V = problem.degree, problem.tau, problem.volume
    if not bradlow_gate(N, tau, V):
        raise NoSolutionExists(
            f"strict bound 4*pi*N < tau*Vol fails: {4 * math.pi * N:.12g} >= {tau * V:.12g}",
            four_pi_n=4 * math.pi * N, tau_volume=tau * V)
    target = problem.target_volume
    if target is not None and not 4 * math.pi * N < tau * target:
        raise NoSolutionExists(
            f"integrated equation needs tau*target_volume > 4*pi*N: {tau * target:.12g}",
            four_pi_n=4 * math.pi * N, tau_volume=tau * target)
    hyp = problem.hypothesis
    grid = problem.grid
    basis = grid.basis
    M = grid.ncoeffs
    if problem.parity_gauge:
        keep = np.flatnonzero((basis.degree + basis.order) % 2 == 0)
    else:
        keep = np.arange(M)
    cp0 = problem.c_prime if target is None else 0.5 * math.log(target / V)
    flux = tau * V * math.exp(2 * cp0) - 4 * math.pi * N
    if flux <= 0:
        raise NoSolutionExists("no vortex solution at zero coupling for this gauge constant")
    total = float(np.sum(problem.section.fine_density * grid.fine_weights))
    f0 = 0.5 * math.log(flux / (math.exp(2 * cp0) * total))
    x = basis.constant_coefficient(f0)
    if target is not None:
        x = np.concatenate([x, [cp0]])
    log = []
    try:
        out = _solve_at(problem, 0.0, x, keep)
        x = out.x
        log.append({"s": 0.0, "iterations": out.iterations, "residual": out.residual_norm})
        s, step = 0.0, homotopy_step
        prev = None
        while s < 1.0:
            trial = min(1.0, s + step)
            guess = x if prev is None else x + (trial - s) / (s - prev[0]) * (x - prev[1])
            try:
                out = _solve_at(problem, trial * problem.alpha, guess, keep)
            except (ConvergenceFailure, SingularJacobian) as exc:
                log.append({"s": trial, "accepted": False, "reason": type(exc).__name__})
                step /= 2
                if step < min_step:
                    raise
                continue
            log.append({"s": trial, "iterations": out.iterations, "residual": out.residual_norm})
            prev = (s, x)
            s, x = trial, out.x
            if out.iterations <= 4:
                step *= 1.5
    except (ConvergenceFailure, SingularJacobian) as exc:
        if hyp is YangClass.NEITHER:
            exc.args = (exc.args[0] + " (nonexistence suspected: divisor is neither symmetric nor stable)",)
        raise
    cf = x[:M]
    cp = problem.c_prime if target is None else float(x[M])
    return _package(problem, cf, cp, out.iterations, log)


def _package(problem: EBProblem, cf: np.ndarray, cp: float, iterations: int, log) -> EBSolution:
    grid = problem.grid
    r = _residual(problem, cf, cp, problem.alpha)
    u_f, _ = _u_fine(problem, cf, cp, problem.alpha)
    e = np.exp(2 * u_f)
    vol = float(np.sum(e * grid.fine_weights))
    f = grid.field_from_coeffs(cf)
    p = np.exp(2 * f.values) * problem.section.density.values
    u = 2 * problem.alpha * problem.tau * f.values - problem.alpha * p + cp
    hyp = problem.hypothesis
    return EBSolution(f, grid.field(u), float(np.linalg.norm(r)), vol, cp,
                      {"max_conformal_factor": float(e.max()), "min_conformal_factor": float(e.min())},
                      hyp, hyp is YangClass.NEITHER, np.array(cf), iterations, list(log))


def integrated_identity(solution: EBSolution, problem: EBProblem) -> float:
    """``integral(e^{2u}(e^{2f}|phi|^2 - tau)) + 4 pi N``, which vanishes for solutions."""
    u, p = _u_fine(problem, solution.coeffs, solution.c_prime, problem.alpha)
    val = float(np.sum(np.exp(2 * u) * (p - problem.tau) * problem.grid.fine_weights))
    return val + 4 * math.pi * problem.degree


def longitudinal_amplitude(field: ScalarField) -> float:
    """Largest coefficient with nonzero azimuthal order."""
    basis = field.grid.basis
    c = field.coeffs()
    return float(np.abs(c[basis.order != 0]).max())


def as_grav(solution: EBSolution, problem: EBProblem, tolerance: float = 1e-8):
    """The same data as a solution of the coupled system with ``c = 0``."""
    gp = GravProblem(problem.grid, problem.section, problem.tau, problem.alpha,
                     tolerance=tolerance)
    u_f, _ = _u_fine(problem, solution.coeffs, solution.c_prime, problem.alpha)
    cu = problem.grid.basis.analyze(u_f, fine=True)
    return gp, solution_from_coeffs(gp, np.concatenate([cu, solution.coeffs]))


# ----- S^1-symmetric oracle --------------------------------------------------------

@dataclass
class RadialProfile:
    """Even solution ``f(s)`` with ``s = log|z|``, sampled on ``s >= 0``."""

    N: int
    tau: float
    alpha: float
    volume: float
    target_volume: float
    f0: float
    c_prime: float
    s: np.ndarray
    f: np.ndarray
    df: np.ndarray
    dense: object = field(repr=False)
    s_max: float = 20.0

    def __call__(self, s) -> np.ndarray:
        s = np.abs(np.asarray(s, dtype=float))
        inside = np.minimum(s, self.s_max)
        out = self.dense(inside.ravel())[0].reshape(s.shape)
        return np.where(s > self.s_max, self.f[-1], out)

    def at_colatitude(self, theta) -> np.ndarray:
        return self(np.log(np.tan(np.asarray(theta) / 2)))

    def u(self, s) -> np.ndarray:
        f = self(s)
        rho = np.cosh(np.asarray(s, dtype=float)) ** (-self.N)
        return 2 * self.alpha * self.tau * f - self.alpha * np.exp(2 * f) * rho + self.c_prime


def _radial_rhs(N, tau, alpha, V, cp):
    def rhs(s, y):
        f, fp, _ = y
        ch = np.cosh(s)
        p = np.exp(2 * f) * ch ** (-N)
        e = np.exp(2 * (2 * alpha * tau * f - alpha * p + cp))
        return [fp, V / (4 * math.pi * ch * ch) * (0.5 * e * (p - tau) + 2 * math.pi * N / V),
                V * e / (ch * ch)]
    return rhs


def _shoot(N, tau, alpha, V, a, cp, s_max, rtol=1e-13, dense=False):
    return solve_ivp(_radial_rhs(N, tau, alpha, V, cp), (0.0, s_max), [a, 0.0, 0.0],
                     method="DOP853", rtol=rtol, atol=1e-14, dense_output=dense)


def _gauge_for_centre(N, tau, alpha, V, a, s_max):
    """Gauge constant making the far-field slope vanish for centre value ``a``.

    The slope decreases with the gauge constant; the first sign change on a
    coarse scan is refined by Brent's method.
    """
    g = lambda cp: _shoot(N, tau, alpha, V, a, cp, s_max, rtol=1e-9).y[1, -1]
    grid = np.arange(-10.0, 8.01, 0.5)
    prev = g(grid[0])
    for i in range(len(grid) - 1):
        nxt = g(grid[i + 1])
        if prev > 0 and nxt <= 0:
            return brentq(g, grid[i], grid[i + 1], xtol=1e-12)
        prev = nxt
    raise ShootingFailure(f"no gauge constant balances the far field for f(0) = {a}")


def radial_ode_oracle(N: int, tau: float, alpha: float, volume: float = 2 * math.pi,
                      target_volume: float = 2 * math.pi, s_max: float = 20.0) -> RadialProfile:
    """S^1-symmetric solution for the divisor (N/2){0} + (N/2){inf} by shooting.

    In ``s = log|z|`` the round metric of area ``volume`` is
    ``volume/(4 pi cosh(s)^2) |ds + i dtheta|^2`` and the normalized density is
    ``cosh(s)^{-N}``.  The profile is even, so ``f'(0) = 0``.  For each centre
    value ``a = f(0)`` the gauge constant is fixed by ``f'(s_max) = 0``; the
    resulting conformal volume increases with ``a`` and ``a`` is tuned to hit
    ``target_volume``.  The bracketing runs at moderate accuracy and is
    polished by a 2x2 Newton solve at integration tolerance 1e-13.
    """
    if N < 2 or N % 2:
        raise ConfigurationError("the symmetric oracle needs an even degree")
    if not eb_parameter_check(alpha, tau, N):
        raise ConfigurationError("the radial oracle is the c = 0 case: alpha*tau*N must equal 1")
    if not tau * target_volume > 4 * math.pi * N:
        raise ShootingFailure("target volume below the Bradlow bound 4 pi N / tau")

    def vol_gap(a):
        cp = _gauge_for_centre(N, tau, alpha, volume, a, s_max)
        return _shoot(N, tau, alpha, volume, a, cp, s_max, rtol=1e-9).y[2, -1] - target_volume

    lo, step = -3.0, 0.25
    while vol_gap(lo) >= 0:
        lo -= 2.0
        if lo < -40:
            raise ShootingFailure("could not bracket the centre value from below")
    hi = lo
    while True:
        try:
            gap = vol_gap(hi + step)
        except ShootingFailure:
            step /= 2
            if step < 1e-6:
                raise
            continue
        if gap > 0:
            hi += step
            break
        lo = hi = hi + step
    a = brentq(vol_gap, lo, hi, xtol=1e-10)
    cp = _gauge_for_centre(N, tau, alpha, volume, a, s_max)

    def F(x):
        y = _shoot(N, tau, alpha, volume, x[0], x[1], s_max).y[:, -1]
        return np.array([y[1], y[2] - target_volume])

    x = np.array([a, cp])
    for _ in range(20):
        r = F(x)
        h = 1e-7
        J = np.column_stack([(F(x + h * e) - F(x - h * e)) / (2 * h) for e in np.eye(2)])
        dx = np.linalg.solve(J, -r)
        x = x + dx
        if np.abs(dx).max() < 1e-14:
            break
    if np.abs(F(x)).max() > 1e-11:
        raise ShootingFailure(f"polishing did not converge: {F(x)}")
    a, cp = float(x[0]), float(x[1])
    sol = _shoot(N, tau, alpha, volume, a, cp, s_max, dense=True)
    return RadialProfile(N, tau, alpha, volume, target_volume, a, cp, sol.t, sol.y[0], sol.y[1],
                         sol.sol, s_max)
