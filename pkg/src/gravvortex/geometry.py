"""Background surfaces, spectral Laplacian, quadrature and conformal curvature.

The Laplacian is the nonnegative operator (minus the usual Laplace-Beltrami).
The background scalar curvature is the constant ``2*pi*chi/volume`` so that
``integral(S0) = 2*pi*chi``; with this normalization the conformal change
``e^{2u} S' = S0 + laplacian(u)`` holds as written.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._spectral import SphereBasis, TorusBasis
from .errors import ConfigurationError, GridMismatchError, SolvabilityError

_grid_ids = itertools.count(1)


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """A discretized constant-curvature surface (round sphere or flat torus).

    ``nodes`` has shape ``shape + (2,)``: (colatitude, longitude) on the sphere,
    lattice coordinates (x1, x2) in [0, 1)^2 on the torus.
    """

    genus: int
    resolution: int
    lattice_modulus: complex | None
    background_volume: float
    basis: object = field(repr=False)
    grid_id: int = field(default_factory=lambda: next(_grid_ids), repr=False)

    @property
    def euler_characteristic(self) -> int:
        return 2 - 2 * self.genus

    @property
    def background_scalar_curvature(self) -> float:
        return 2 * math.pi * self.euler_characteristic / self.background_volume

    @property
    def nodes(self) -> np.ndarray:
        return self.basis.nodes()

    @property
    def weights(self) -> np.ndarray:
        return self.basis.weights()

    @property
    def shape(self) -> tuple:
        return self.basis.shape()

    @property
    def fine_shape(self) -> tuple:
        return self.basis.shape(fine=True)

    @property
    def fine_nodes(self) -> np.ndarray:
        return self.basis.nodes(fine=True)

    @property
    def fine_weights(self) -> np.ndarray:
        return self.basis.weights(fine=True)

    @property
    def ncoeffs(self) -> int:
        return self.basis.size

    @property
    def volume(self) -> float:
        return self.background_volume

    def same_as(self, other: "SurfaceGrid") -> bool:
        return self is other or self.descriptor() == other.descriptor()

    def descriptor(self) -> dict:
        modulus = self.lattice_modulus
        return {
            "genus": self.genus,
            "resolution": self.resolution,
            "modulus_re": None if modulus is None else modulus.real,
            "modulus_im": None if modulus is None else modulus.imag,
            "volume": self.background_volume,
        }

    # coefficient-space helpers used by the solvers
    def to_coeffs(self, values: np.ndarray, fine: bool = False) -> np.ndarray:
        return self.basis.analyze(values, fine=fine)

    def from_coeffs(self, coeffs: np.ndarray, fine: bool = False) -> np.ndarray:
        return self.basis.synth(coeffs, fine=fine)

    def field(self, values) -> "ScalarField":
        return ScalarField(np.asarray(values, dtype=float), self)

    def field_from_coeffs(self, coeffs: np.ndarray) -> "ScalarField":
        return ScalarField(self.from_coeffs(coeffs), self)

    def constant(self, value: float) -> "ScalarField":
        return ScalarField(np.full(self.shape, float(value)), self)


def grid_from_descriptor(desc: dict) -> SurfaceGrid:
    if desc["genus"] == 0:
        return make_sphere_grid(int(desc["resolution"]), float(desc["volume"]))
    if desc["genus"] == 1:
        modulus = complex(desc["modulus_re"], desc["modulus_im"])
        return make_torus_grid(int(desc["resolution"]), modulus, float(desc["volume"]))
    raise ConfigurationError(f"unsupported genus {desc['genus']!r}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real samples on the native nodes of a grid."""

    values: np.ndarray
    grid: SurfaceGrid = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatchError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def grid_id(self) -> int:
        return self.grid.grid_id

    def coeffs(self) -> np.ndarray:
        return self.grid.to_coeffs(self.values)

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def __add__(self, other):
        return ScalarField(self.values + _values(other, self.grid), self.grid)

    def __sub__(self, other):
        return ScalarField(self.values - _values(other, self.grid), self.grid)

    def __mul__(self, other):
        return ScalarField(self.values * _values(other, self.grid), self.grid)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(-self.values, self.grid)


def _values(other, grid):
    if isinstance(other, ScalarField):
        _check(other, grid)
        return other.values
    return other


def _check(field: ScalarField, grid: SurfaceGrid) -> None:
    if not field.grid.same_as(grid):
        raise GridMismatchError("field does not live on the given grid")


def make_sphere_grid(bandlimit: int, volume: float = 2 * math.pi) -> SurfaceGrid:
    """Round sphere of total area ``volume`` resolved up to spherical-harmonic degree ``bandlimit``."""
    if int(bandlimit) != bandlimit or bandlimit < 8:
        raise ConfigurationError(f"sphere bandlimit must be an integer >= 8, got {bandlimit}")
    if not volume > 0:
        raise ConfigurationError(f"volume must be positive, got {volume}")
    basis = SphereBasis(int(bandlimit), float(volume))
    return SurfaceGrid(0, int(bandlimit), None, float(volume), basis)


def make_torus_grid(n: int, modulus: complex = 1j, volume: float = 1.0) -> SurfaceGrid:
    """Flat torus C/(Z + modulus Z), rescaled to area ``volume``, sampled on an n x n grid."""
    if int(n) != n or n < 16 or n % 2:
        raise ConfigurationError(f"torus grid size must be an even integer >= 16, got {n}")
    modulus = complex(modulus)
    if not modulus.imag > 0:
        raise ConfigurationError(f"lattice modulus needs positive imaginary part, got {modulus}")
    if not volume > 0:
        raise ConfigurationError(f"volume must be positive, got {volume}")
    basis = TorusBasis(int(n), modulus, float(volume))
    return SurfaceGrid(1, int(n), modulus, float(volume), basis)


def laplacian(field: ScalarField, grid: SurfaceGrid) -> ScalarField:
    """Nonnegative Laplacian, applied spectrally to the band-limited projection."""
    _check(field, grid)
    c = grid.to_coeffs(field.values)
    return grid.field_from_coeffs(grid.basis.eigenvalues * c)


def poisson_solve(rhs: ScalarField, grid: SurfaceGrid, tol: float = 1e-9) -> ScalarField:
    """Mean-zero solution of ``laplacian(psi) = rhs``.

    Raises ``SolvabilityError`` when the mean of ``rhs`` is not negligible:
    ``|integral(rhs)| > tol * ||rhs||_2 * sqrt(volume)``.
    """
    _check(rhs, grid)
    c = grid.to_coeffs(rhs.values)
    return grid.field_from_coeffs(poisson_coeffs(grid, c, tol))


def poisson_coeffs(grid: SurfaceGrid, rhs_coeffs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    total = rhs_coeffs[0] * math.sqrt(grid.volume)
    size = float(np.linalg.norm(rhs_coeffs)) * math.sqrt(grid.volume)
    if abs(total) > tol * size:
        raise SolvabilityError(
            f"right-hand side integrates to {total:.3e}, above tolerance {tol * size:.3e}")
    eig = grid.basis.eigenvalues
    out = np.zeros_like(rhs_coeffs)
    out[1:] = rhs_coeffs[1:] / eig[1:]
    return out


def integrate(field: ScalarField, grid: SurfaceGrid) -> float:
    """Quadrature over the native grid, exact for products of band-limited fields."""
    _check(field, grid)
    return float(np.sum(field.values * grid.weights))


def conformal_scalar_curvature(u: ScalarField, grid: SurfaceGrid) -> ScalarField:
    """Scalar curvature of ``e^{2u}`` times the background metric."""
    lap = laplacian(u, grid)
    return ScalarField(np.exp(-2 * u.values) * (grid.background_scalar_curvature + lap.values), grid)


def resample(field: ScalarField, grid: SurfaceGrid) -> ScalarField:
    """Spectral interpolation of ``field`` onto another grid of the same surface."""
    src = field.grid
    if src.genus != grid.genus or not math.isclose(src.volume, grid.volume, rel_tol=1e-14):
        raise GridMismatchError("resampling requires the same surface")
    if src.genus == 1 and src.lattice_modulus != grid.lattice_modulus:
        raise GridMismatchError("resampling requires the same lattice")
    return grid.field_from_coeffs(transfer_coeffs(src, grid, field.coeffs()))


def transfer_coeffs(src: SurfaceGrid, dst: SurfaceGrid, coeffs: np.ndarray) -> np.ndarray:
    """Map coefficients between two resolutions (zero padding or truncation)."""
    bs, bd = src.basis, dst.basis
    if src.genus == 0:
        key_s = zip(bs.degree, bs.order, bs.kind)
        key_d = zip(bd.degree, bd.order, bd.kind)
    else:
        key_s = zip(bs.k1, bs.k2, bs.kind)
        key_d = zip(bd.k1, bd.k2, bd.kind)
    index = {k: i for i, k in enumerate(key_d)}
    out = np.zeros(coeffs.shape[:-1] + (bd.size,))
    for i, k in enumerate(key_s):
        j = index.get(k)
        if j is not None:
            out[..., j] = coeffs[..., i]
    return out


def stereographic(grid: SurfaceGrid, fine: bool = False) -> np.ndarray:
    """Stereographic coordinate ``z = tan(theta/2) e^{i phi}`` of sphere nodes."""
    nodes = grid.basis.nodes(fine=fine)
    return np.tan(nodes[..., 0] / 2) * np.exp(1j * nodes[..., 1])


def torus_points(grid: SurfaceGrid, fine: bool = False) -> np.ndarray:
    """Unscaled lattice coordinate ``x1 + modulus * x2`` of torus nodes."""
    nodes = grid.basis.nodes(fine=fine)
    return nodes[..., 0] + grid.lattice_modulus * nodes[..., 1]
