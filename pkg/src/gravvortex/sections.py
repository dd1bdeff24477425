"""Divisors, the density |phi|^2 of their canonical sections, and GIT stability on P^1.

Sphere points are stereographic coordinates ``z = tan(theta/2) e^{i phi}``
(``z = 0`` is the north pole) with ``complex('inf')`` standing for the point
at infinity.  Torus points are unscaled lattice coordinates ``x1 + modulus*x2``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import (ConfigurationError, InvalidDivisorError, OracleRefused,
                     SectionConstructionError)
from .geometry import ScalarField, SurfaceGrid, torus_points

INF = complex(math.inf, 0.0)


def is_infinite(p: complex) -> bool:
    return cmath.isinf(p)


def homogeneous(p: complex) -> tuple[complex, complex]:
    """Unit homogeneous coordinates ``(a, b)`` with ``p = a / b``."""
    if is_infinite(p):
        return 1.0 + 0j, 0j
    r = math.sqrt(1 + abs(p) ** 2)
    return p / r, 1 / r


def chordal_distance(p: complex, q: complex) -> float:
    a, b = homogeneous(p)
    c, d = homogeneous(q)
    return abs(a * d - b * c)


@dataclass(frozen=True)
class Divisor:
    """Effective divisor ``sum n_j p_j`` with distinct points."""

    points: tuple
    multiplicities: tuple

    def __post_init__(self):
        pts = tuple(INF if is_infinite(complex(p)) else complex(p) for p in self.points)
        mult = tuple(int(n) for n in self.multiplicities)
        if len(pts) != len(mult):
            raise InvalidDivisorError("points and multiplicities differ in length")
        if not pts:
            raise InvalidDivisorError("divisor has no points")
        if any(n < 1 or n != m for n, m in zip(mult, self.multiplicities)):
            raise InvalidDivisorError("multiplicities must be positive integers")
        for i in range(len(pts)):
            for j in range(i):
                if chordal_distance(pts[i], pts[j]) < 1e-9:
                    raise InvalidDivisorError(f"points {pts[j]} and {pts[i]} collide")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "multiplicities", mult)

    @property
    def degree(self) -> int:
        return sum(self.multiplicities)

    def moebius(self, matrix) -> "Divisor":
        """Image under ``z -> (a z + b) / (c z + d)``."""
        (a, b), (c, d) = matrix
        out = []
        for p in self.points:
            x, y = homogeneous(p)
            u, v = a * x + b * y, c * x + d * y
            out.append(INF if abs(v) < 1e-300 else u / v)
        return Divisor(tuple(out), self.multiplicities)

    def to_json(self) -> dict:
        pts = ["inf" if is_infinite(p) else [p.real, p.imag] for p in self.points]
        return {"points": pts, "multiplicities": list(self.multiplicities)}

    @classmethod
    def from_json(cls, data: dict) -> "Divisor":
        pts = []
        for p in data["points"]:
            if isinstance(p, str):
                if p.lower() != "inf":
                    raise InvalidDivisorError(f"unknown point literal {p!r}")
                pts.append(INF)
            else:
                re, im = p
                pts.append(complex(float(re), float(im)))
        return cls(tuple(pts), tuple(data["multiplicities"]))


@dataclass(frozen=True, eq=False)
class SectionField:
    """Samples of |phi|^2 measured in the background hermitian metric.

    ``density`` lives on the native nodes, ``fine_density`` on the padded
    nodes used for nonlinear terms.  ``normalization`` is the factor applied to
    the raw product so that the supremum equals one.
    """

    density: ScalarField
    divisor: Divisor | None
    normalization: float
    fine_density: np.ndarray = field(repr=False)
    evaluator: Callable | None = field(default=None, repr=False)
    declared_degree: int | None = None

    @property
    def grid(self) -> SurfaceGrid:
        return self.density.grid

    @property
    def degree(self) -> int:
        if self.declared_degree is not None:
            return self.declared_degree
        return self.divisor.degree

    def evaluate(self, points) -> np.ndarray:
        """Normalized density at arbitrary surface points."""
        if self.evaluator is None:
            return np.full(np.shape(points), self.density.values.flat[0])
        return self.normalization * self.evaluator(np.asarray(points, dtype=complex))

    def scaled(self, factor: float) -> "SectionField":
        """Density multiplied by ``factor`` (the normalization is not reapplied)."""
        return SectionField(self.density * factor, self.divisor, self.normalization * factor,
                            self.fine_density * factor, _scaled(self.evaluator, factor),
                            self.declared_degree)


def _scaled(fn, factor):
    if fn is None:
        return None
    return lambda pts: factor * fn(pts)


def formal_section(grid: SurfaceGrid, value: float, degree: int = 0) -> SectionField:
    """Constant density with a declared degree, for closed-form checks."""
    if not value > 0:
        raise ConfigurationError("formal section density must be positive")
    dens = grid.constant(value)
    return SectionField(dens, None, 1.0, np.full(grid.fine_shape, float(value)), None, degree)


# ----- sphere ---------------------------------------------------------------

def _sphere_raw_angles(divisor: Divisor, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    x0 = np.sin(theta / 2) * np.exp(1j * phi)
    x1 = np.cos(theta / 2) + 0j
    out = np.ones(np.broadcast(x0, x1).shape)
    for p, n in zip(divisor.points, divisor.multiplicities):
        a, b = homogeneous(p)
        out = out * np.abs(b * x0 - a * x1) ** (2 * n)
    return out


def _sphere_raw_points(divisor: Divisor, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    inf = np.isinf(z)
    zz = np.where(inf, 0, z)
    theta = np.where(inf, np.pi, 2 * np.arctan(np.abs(zz)))
    phi = np.angle(zz)
    return _sphere_raw_angles(divisor, theta, phi)


def _sphere_sup(divisor: Divisor, grid: SurfaceGrid) -> float:
    nodes = grid.fine_nodes
    raw = _sphere_raw_angles(divisor, nodes[..., 0], nodes[..., 1])
    i = np.unravel_index(np.argmax(raw), raw.shape)
    x0 = nodes[i]

    def neg(x):
        return -float(_sphere_raw_angles(divisor, np.array(x[0]), np.array(x[1])))

    res = minimize(neg, x0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
    return max(float(raw[i]), -float(res.fun))


def build_sphere_section(divisor: Divisor, grid: SurfaceGrid, coefficient: complex = 1.0) -> SectionField:
    """Normalized density of the section of O(N) vanishing on ``divisor``.

    The raw density is ``|coefficient|^2 * prod |b_j x0 - a_j x1|^{2 n_j}`` in
    unit homogeneous coordinates, i.e. the Fubini-Study norm; it is divided by
    its supremum.
    """
    if grid.genus != 0:
        raise ConfigurationError("sphere section requires a genus-0 grid")
    if coefficient == 0:
        raise ConfigurationError("section coefficient must be nonzero")
    weight = abs(coefficient) ** 2
    scale = 1.0 / (weight * _sphere_sup(divisor, grid))
    nodes, fine = grid.nodes, grid.fine_nodes
    dens = scale * weight * _sphere_raw_angles(divisor, nodes[..., 0], nodes[..., 1])
    fdens = scale * weight * _sphere_raw_angles(divisor, fine[..., 0], fine[..., 1])

    def evaluator(z):
        return weight * _sphere_raw_points(divisor, z)

    return SectionField(grid.field(dens), divisor, scale, fdens, evaluator)


# ----- torus ----------------------------------------------------------------

def theta1(z, modulus: complex, terms: int | None = None) -> np.ndarray:
    """Jacobi theta function of the first kind by its q-series."""
    z = np.asarray(z, dtype=complex)
    q = cmath.exp(1j * math.pi * modulus)
    if terms is None:
        terms = max(8, int(math.ceil(math.sqrt(60 / (math.pi * modulus.imag)))) + 6)
    out = np.zeros(z.shape, dtype=complex)
    for n in range(terms):
        out += (-1) ** n * q ** ((n + 0.5) ** 2) * np.sin((2 * n + 1) * z)
    return 2 * out


def _reduce(w: np.ndarray, modulus: complex) -> np.ndarray:
    """Translate ``w`` by lattice vectors into the centered fundamental cell."""
    b = np.round(w.imag / modulus.imag)
    w = w - b * modulus
    a = np.round(w.real)
    return w - a


def _theta_factor(w: np.ndarray, p: complex, modulus: complex, reduce: bool = True) -> np.ndarray:
    d = w - p
    if reduce:
        d = _reduce(d, modulus)
    th = theta1(np.pi * d, modulus)
    return np.abs(th) ** 2 * np.exp(-2 * np.pi * d.imag ** 2 / modulus.imag)


def _torus_raw(divisor: Divisor, w: np.ndarray, modulus: complex, reduce: bool = True) -> np.ndarray:
    out = np.ones(np.shape(w))
    for p, n in zip(divisor.points, divisor.multiplicities):
        out = out * _theta_factor(w, p, modulus, reduce) ** n
    return out


def _check_torus_divisor(divisor: Divisor, modulus: complex) -> None:
    pts = np.array(divisor.points)
    if np.any(np.isinf(pts)):
        raise InvalidDivisorError("torus divisor cannot contain the point at infinity")
    for i in range(len(pts)):
        for j in range(i):
            d = _reduce(np.array(pts[i] - pts[j]), modulus)
            if abs(complex(d)) < 1e-9:
                raise InvalidDivisorError(f"points {pts[j]} and {pts[i]} coincide modulo the lattice")


def build_torus_section(divisor: Divisor, grid: SurfaceGrid) -> SectionField:
    """Doubly periodic density from Gaussian-weighted theta products.

    The factor for a point ``p`` is ``|theta1(pi (w - p))|^2 exp(-2 pi Im(w-p)^2 / Im(modulus))``,
    whose logarithm has constant Laplacian away from ``p``; the product is
    therefore the norm of a section in the flat hermite-Einstein metric.
    """
    if grid.genus != 1:
        raise ConfigurationError("torus section requires a genus-1 grid")
    if divisor.degree < 1:
        raise ConfigurationError("torus section requires positive degree")
    modulus = grid.lattice_modulus
    _check_torus_divisor(divisor, modulus)
    _periodicity_check(divisor, modulus)
    w_fine = torus_points(grid, fine=True)
    raw_fine = _torus_raw(divisor, w_fine, modulus)
    i = np.unravel_index(np.argmax(raw_fine), raw_fine.shape)
    start = grid.fine_nodes[i]

    def neg(x):
        w = np.array(x[0] + modulus * x[1])
        return -float(_torus_raw(divisor, w, modulus))

    res = minimize(neg, start, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
    scale = 1.0 / max(float(raw_fine[i]), -float(res.fun))
    dens = scale * _torus_raw(divisor, torus_points(grid), modulus)

    def evaluator(w):
        return _torus_raw(divisor, w, modulus)

    return SectionField(grid.field(dens), divisor, scale, scale * raw_fine, evaluator)


def _periodicity_check(divisor: Divisor, modulus: complex, tol: float = 1e-10) -> float:
    """Compare unreduced evaluations across both lattice translations."""
    rng = np.random.default_rng(12345)
    w = rng.uniform(-0.5, 0.5, 64) + modulus * rng.uniform(-0.5, 0.5, 64)
    w = w + np.mean(divisor.points)
    base = _torus_raw(divisor, w, modulus, reduce=False)
    ref = np.abs(base).max()
    err = 0.0
    for shift in (1.0, modulus):
        moved = _torus_raw(divisor, w + shift, modulus, reduce=False)
        err = max(err, float(np.abs(moved - base).max() / ref))
    if err > tol:
        raise SectionConstructionError(f"torus density not periodic: relative error {err:.2e}")
    return err


def build_section(divisor: Divisor, grid: SurfaceGrid) -> SectionField:
    if grid.genus == 0:
        return build_sphere_section(divisor, grid)
    return build_torus_section(divisor, grid)


# ----- GIT stability ---------------------------------------------------------

class Stability(str, enum.Enum):
    STABLE = "Stable"
    STRICTLY_POLYSTABLE = "StrictlyPolystable"
    SEMISTABLE_NOT_POLYSTABLE = "SemistableNotPolystable"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityClass:
    kind: Stability
    witness: dict

    def to_json(self) -> dict:
        wit = dict(self.witness)
        if "points" in wit:
            wit["points"] = ["inf" if is_infinite(p) else [p.real, p.imag] for p in wit["points"]]
        return {"class": self.kind.value, "witness": wit}


def git_classify(divisor: Divisor) -> StabilityClass:
    """Multiplicity criterion for SL(2,C)-stability of a binary form of degree N."""
    N = divisor.degree
    mult = divisor.multiplicities
    top = max(mult)
    where = [p for p, n in zip(divisor.points, mult) if n == top]
    witness = {"multiplicity": top, "points": where[:1], "degree": N}
    if 2 * top < N:
        return StabilityClass(Stability.STABLE, witness)
    if 2 * top > N:
        return StabilityClass(Stability.UNSTABLE, witness)
    if len(mult) == 2:
        witness["points"] = list(divisor.points)
        return StabilityClass(Stability.STRICTLY_POLYSTABLE, witness)
    return StabilityClass(Stability.SEMISTABLE_NOT_POLYSTABLE, witness)


def binary_form_coefficients(divisor: Divisor, zero: complex, pole: complex) -> np.ndarray:
    """Coefficients of the section in coordinates sending ``zero`` to 0 and ``pole`` to infinity.

    Entry ``k`` multiplies ``y0^k y1^(N-k)`` where ``y0`` vanishes at ``zero``
    and ``y1`` vanishes at ``pole``.
    """
    a0, b0 = homogeneous(zero)
    a1, b1 = homogeneous(pole)
    A = np.array([[b0, -a0], [b1, -a1]], dtype=complex)
    Ainv = np.linalg.inv(A)
    poly = np.array([1.0 + 0j])
    for p, n in zip(divisor.points, divisor.multiplicities):
        a, b = homogeneous(p)
        c0, c1 = np.array([b, -a]) @ Ainv
        lin = np.array([c1, c0])   # ascending powers of y0 (y1 implicit)
        for _ in range(n):
            poly = np.convolve(poly, lin)
    return poly


def _weights(coeffs: np.ndarray, rel: float = 1e-9) -> np.ndarray:
    N = len(coeffs) - 1
    nz = np.abs(coeffs) > rel * np.abs(coeffs).max()
    return (2 * np.arange(N + 1) - N)[nz]


def hilbert_mumford_oracle(divisor: Divisor, extra_points: int = 4, seed: int = 0) -> StabilityClass:
    """Brute-force stability via weights of one-parameter subgroups.

    Every one-parameter subgroup considered fixes an ordered pair of points
    (divisor points plus a few random ones).  The weight of the monomial
    ``y0^k y1^(N-k)`` is ``2k - N``.
    """
    N = divisor.degree
    if N > 8:
        raise OracleRefused("Hilbert-Mumford oracle is limited to degree <= 8")
    rng = np.random.default_rng(seed)
    cand = list(divisor.points)
    while len(cand) < len(divisor.points) + extra_points:
        p = complex(*rng.normal(size=2))
        if all(chordal_distance(p, q) > 1e-6 for q in cand):
            cand.append(p)
    min_weights = []
    for i, p in enumerate(cand):
        for j, q in enumerate(cand):
            if i == j:
                continue
            coeffs = binary_form_coefficients(divisor, p, q)
            w = _weights(coeffs)
            min_weights.append((int(w.min()), p, q, w))
    mu, p, q, w = max(min_weights, key=lambda t: t[0])
    if mu > 0:
        return StabilityClass(Stability.UNSTABLE, _oracle_witness(divisor, p, mu))
    if mu < 0:
        return StabilityClass(Stability.STABLE, _oracle_witness(divisor, None, mu))
    # semistable: polystable when some weight-zero limit is already the whole form
    for m, p0, q0, w0 in min_weights:
        if m == 0 and np.all(w0 == 0):
            return StabilityClass(Stability.STRICTLY_POLYSTABLE, _oracle_witness(divisor, p0, 0))
    return StabilityClass(Stability.SEMISTABLE_NOT_POLYSTABLE, _oracle_witness(divisor, p, 0))


def _oracle_witness(divisor, point, min_weight):
    wit = {"min_weight": min_weight, "degree": divisor.degree, "points": []}
    if point is not None:
        wit["points"] = [point]
        wit["multiplicity"] = _multiplicity_at(divisor, point, 1e-9)
    return wit


def _multiplicity_at(divisor: Divisor, point: complex, tol: float = 1e-12) -> int:
    for p, n in zip(divisor.points, divisor.multiplicities):
        if chordal_distance(p, point) < tol:
            return n
    return 0


def is_cstar_fixed_point(divisor: Divisor) -> bool:
    """True when the divisor is (N/2){0} + (N/2){inf}, the fixed point of the C* action."""
    N = divisor.degree
    return (len(divisor.points) == 2 and 2 * _multiplicity_at(divisor, 0j) == N
            and 2 * _multiplicity_at(divisor, INF) == N)


def closed_cstar_orbit(divisor: Divisor) -> bool:
    """Closedness of the orbit of the section under the C* fixing 0 and infinity.

    The fixed point itself is reported as a closed orbit (see ``is_cstar_fixed_point``).
    """
    N = divisor.degree
    if is_cstar_fixed_point(divisor):
        return True
    return 2 * _multiplicity_at(divisor, 0j) < N and 2 * _multiplicity_at(divisor, INF) < N
