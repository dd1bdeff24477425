"""Damped Newton iteration with residual-monotone backtracking."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure, SingularJacobian


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    history: list = field(default_factory=list)


def smallest_singular(matrix: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest singular value and its right singular vector (dense SVD)."""
    _, s, vt = np.linalg.svd(matrix)
    return float(s[-1]), vt[-1]


def damped_newton(residual: Callable, jacobian: Callable, x0: np.ndarray, *, tol: float,
                  max_iter: int, equations=None, unknowns=None, min_step: float = 2.0**-20,
                  singular_tol: float | None = None, merit: Callable | None = None) -> NewtonResult:
    """Solve ``residual(x) = 0`` by Newton steps damped to keep the merit decreasing.

    ``equations`` and ``unknowns`` select the square sub-system that is
    actually inverted (rows that vanish identically and gauge directions are
    left out); the merit is the Euclidean norm of the full residual unless
    ``merit`` is given.  With ``singular_tol`` set, the smallest singular value
    of the reduced Jacobian is checked every iteration and a
    ``SingularJacobian`` is raised below it.
    """
    merit = merit or (lambda r: float(np.linalg.norm(r)))
    x = np.array(x0, dtype=float)
    r = residual(x)
    norm = merit(r)
    history = [{"iteration": 0, "residual": norm, "step": None}]
    if not np.isfinite(norm):
        raise ConvergenceFailure("initial residual is not finite", history, x)
    eq = slice(None) if equations is None else equations
    var = slice(None) if unknowns is None else unknowns
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return NewtonResult(x, norm, it - 1, history)
        J = jacobian(x)[eq][:, var]
        if singular_tol is not None:
            sigma, vec = smallest_singular(J)
            if sigma < singular_tol:
                full = np.zeros_like(x)
                full[var] = vec
                raise SingularJacobian(
                    f"linearization has smallest singular value {sigma:.3e}", sigma, full)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            try:
                lu = sla.lu_factor(J, check_finite=True)
                dx_red = sla.lu_solve(lu, -r[eq])
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SingularJacobian(f"linear solve failed: {exc}", 0.0) from exc
        if not np.all(np.isfinite(dx_red)):
            raise SingularJacobian("linear solve produced non-finite update", 0.0)
        dx = np.zeros_like(x)
        dx[var] = dx_red
        t = 1.0
        while True:
            x_new = x + t * dx
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = residual(x_new)   # overflowing trials are rejected below
            n_new = merit(r_new)
            if np.isfinite(n_new) and n_new <= (1 - 1e-4 * t) * norm:
                break
            t *= 0.5
            if t < min_step:
                history.append({"iteration": it, "residual": norm, "step": 0.0})
                raise ConvergenceFailure(
                    f"line search stalled at residual {norm:.3e} (tolerance {tol:.1e})",
                    history, x)
        x, r, norm = x_new, r_new, n_new
        history.append({"iteration": it, "residual": norm, "step": t})
    if norm <= tol:
        return NewtonResult(x, norm, max_iter, history)
    raise ConvergenceFailure(
        f"no convergence in {max_iter} iterations, residual {norm:.3e}", history, x)
