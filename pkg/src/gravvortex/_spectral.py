"""Real orthonormal spectral bases on the round sphere and the flat torus.

Both bases act on coefficient arrays with arbitrary leading batch axes.  Basis
functions are orthonormal with respect to the background area form, so the
coefficient Euclidean norm is the L2 norm of the band-limited field.  Every
basis owns two tensor grids: the native grid (exact quadrature for products of
two band-limited fields) and a 3/2-padded fine grid on which nonlinear terms
are sampled before being projected back.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import roots_legendre, sph_harm_y


class _SphereMesh:
    """Gauss-Legendre x equispaced tensor grid with associated Legendre tables."""

    def __init__(self, degree: int, bandlimit: int, radius: float):
        self.nlat = degree + 1
        self.nlon = 2 * degree + 2
        x, gw = roots_legendre(self.nlat)
        # ascending colatitude: theta = 0 is the north pole
        self.theta = np.arccos(x)[::-1].copy()
        gw = gw[::-1].copy()
        self.phi = 2 * np.pi * np.arange(self.nlon) / self.nlon
        self.weights = np.outer(radius**2 * gw * 2 * np.pi / self.nlon, np.ones(self.nlon))
        self._gw = gw
        self.legendre = []
        for m in range(bandlimit + 1):
            ells = np.arange(m, bandlimit + 1)
            tab = sph_harm_y(ells[None, :], m, self.theta[:, None], 0.0).real
            self.legendre.append(np.ascontiguousarray(tab))


class SphereBasis:
    """Real spherical harmonics up to degree ``bandlimit`` on a sphere of area ``volume``."""

    genus = 0

    def __init__(self, bandlimit: int, volume: float):
        self.bandlimit = L = int(bandlimit)
        self.volume = float(volume)
        self.radius = math.sqrt(self.volume / (4 * np.pi))
        self.size = (L + 1) ** 2
        ell, order, kind = [], [], []
        self._blocks = []
        start = 0
        for m in range(L + 1):
            n = L + 1 - m
            for part in ((0,) if m == 0 else (0, 1)):
                self._blocks.append((m, part, start, start + n))
                ell.extend(range(m, L + 1))
                order.extend([m] * n)
                kind.extend([part] * n)
                start += n
        self.degree = np.array(ell)
        self.order = np.array(order)
        # 0 for cosine-type (including m = 0), 1 for sine-type
        self.kind = np.array(kind)
        self.eigenvalues = self.degree * (self.degree + 1) / self.radius**2
        self.native = _SphereMesh(L, L, self.radius)
        self.fine = _SphereMesh(math.ceil(1.5 * L), L, self.radius)

    def mesh(self, fine: bool) -> _SphereMesh:
        return self.fine if fine else self.native

    def synth(self, coeffs: np.ndarray, fine: bool = False) -> np.ndarray:
        mesh = self.mesh(fine)
        coeffs = np.asarray(coeffs, dtype=float)
        lead = coeffs.shape[:-1]
        spec = np.zeros(lead + (mesh.nlat, mesh.nlon // 2 + 1), dtype=complex)
        for m, part, a, b in self._blocks:
            g = coeffs[..., a:b] @ mesh.legendre[m].T
            if m == 0:
                spec[..., 0] = mesh.nlon * g
            elif part == 0:
                spec[..., m] += mesh.nlon / 2 * math.sqrt(2) * g
            else:
                spec[..., m] -= 1j * mesh.nlon / 2 * math.sqrt(2) * g
        return np.fft.irfft(spec, n=mesh.nlon, axis=-1) / self.radius

    def analyze(self, values: np.ndarray, fine: bool = False) -> np.ndarray:
        mesh = self.mesh(fine)
        values = np.asarray(values, dtype=float)
        # Legendre quadrature leaks a constant into every zonal degree at round-off
        # level; split the mean off and put it back into degree 0 exactly
        mean = np.sum(values * mesh.weights, axis=(-2, -1)) / self.volume
        values = values - mean[..., None, None]
        spec = np.fft.rfft(values, axis=-1)
        spec = spec * (mesh._gw * self.radius * 2 * np.pi / mesh.nlon)[:, None]
        out = np.empty(values.shape[:-2] + (self.size,))
        for m, part, a, b in self._blocks:
            if m == 0:
                col = spec[..., 0].real
            elif part == 0:
                col = math.sqrt(2) * spec[..., m].real
            else:
                col = -math.sqrt(2) * spec[..., m].imag
            out[..., a:b] = col @ mesh.legendre[m]
        out[..., 0] = mean * math.sqrt(self.volume)
        return out

    def nodes(self, fine: bool = False) -> np.ndarray:
        mesh = self.mesh(fine)
        th, ph = np.meshgrid(mesh.theta, mesh.phi, indexing="ij")
        return np.stack([th, ph], axis=-1)

    def weights(self, fine: bool = False) -> np.ndarray:
        return self.mesh(fine).weights

    def shape(self, fine: bool = False) -> tuple:
        mesh = self.mesh(fine)
        return (mesh.nlat, mesh.nlon)

    def constant_coefficient(self, value: float) -> np.ndarray:
        out = np.zeros(self.size)
        out[0] = value * math.sqrt(self.volume)
        return out


class TorusBasis:
    """Real Fourier modes on C / s(Z + tau Z) with |k1|, |k2| < n/2."""

    genus = 1

    def __init__(self, n: int, modulus: complex, volume: float):
        self.n = int(n)
        self.modulus = complex(modulus)
        self.volume = float(volume)
        self.scale = math.sqrt(self.volume / self.modulus.imag)
        K = self.n // 2 - 1
        self.kmax = K
        half = [(k1, k2) for k2 in range(0, K + 1) for k1 in range(-K, K + 1)
                if k2 > 0 or k1 > 0]
        self.half_modes = np.array(half, dtype=int)
        self.nhalf = len(half)
        self.size = 1 + 2 * self.nhalf
        k1 = np.concatenate([[0], self.half_modes[:, 0], self.half_modes[:, 0]])
        k2 = np.concatenate([[0], self.half_modes[:, 1], self.half_modes[:, 1]])
        self.k1, self.k2 = k1, k2
        self.kind = np.concatenate([[0], np.zeros(self.nhalf, int), np.ones(self.nhalf, int)])
        s, t = self.scale, self.modulus
        # the dual lattice vector of (k1, k2) has components below
        kx = k1 / s
        ky = (k2 - k1 * t.real) / (s * t.imag)
        self.eigenvalues = 4 * np.pi**2 * (kx**2 + ky**2)
        self.nf = (3 * self.n) // 2
        self._g = math.sqrt(2 * self.volume)

    def _n(self, fine: bool) -> int:
        return self.nf if fine else self.n

    def synth(self, coeffs: np.ndarray, fine: bool = False) -> np.ndarray:
        n = self._n(fine)
        coeffs = np.asarray(coeffs, dtype=float)
        lead = coeffs.shape[:-1]
        spec = np.zeros(lead + (n, n), dtype=complex)
        a = coeffs[..., 1:1 + self.nhalf]
        b = coeffs[..., 1 + self.nhalf:]
        c = (a - 1j * b) / self._g
        h1, h2 = self.half_modes[:, 0], self.half_modes[:, 1]
        spec[..., 0, 0] = coeffs[..., 0] / math.sqrt(self.volume)
        spec[..., h1 % n, h2 % n] = c
        spec[..., (-h1) % n, (-h2) % n] = np.conj(c)
        return np.fft.ifft2(spec, axes=(-2, -1)).real * (n * n)

    def analyze(self, values: np.ndarray, fine: bool = False) -> np.ndarray:
        n = self._n(fine)
        values = np.asarray(values, dtype=float)
        spec = np.fft.fft2(values, axes=(-2, -1)) / (n * n)
        h1, h2 = self.half_modes[:, 0], self.half_modes[:, 1]
        c = spec[..., h1 % n, h2 % n]
        out = np.empty(values.shape[:-2] + (self.size,))
        out[..., 0] = spec[..., 0, 0].real * math.sqrt(self.volume)
        out[..., 1:1 + self.nhalf] = self._g * c.real
        out[..., 1 + self.nhalf:] = -self._g * c.imag
        return out

    def nodes(self, fine: bool = False) -> np.ndarray:
        n = self._n(fine)
        x = np.arange(n) / n
        a, b = np.meshgrid(x, x, indexing="ij")
        return np.stack([a, b], axis=-1)

    def weights(self, fine: bool = False) -> np.ndarray:
        n = self._n(fine)
        return np.full((n, n), self.volume / (n * n))

    def shape(self, fine: bool = False) -> tuple:
        n = self._n(fine)
        return (n, n)

    def constant_coefficient(self, value: float) -> np.ndarray:
        out = np.zeros(self.size)
        out[0] = value * math.sqrt(self.volume)
        return out


def project(basis, fine_values: np.ndarray) -> np.ndarray:
    """Galerkin projection of fine-grid samples onto the band-limited space."""
    return basis.analyze(fine_values, fine=True)


def multiplication_matrix(basis, weight_fine: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Dense Galerkin matrix of multiplication by a fine-grid weight."""
    n = basis.size
    out = np.empty((n, n))
    eye = np.eye(n)
    for a in range(0, n, chunk):
        cols = eye[a:a + chunk]
        vals = basis.synth(cols, fine=True) * weight_fine
        out[:, a:a + chunk] = basis.analyze(vals, fine=True).T
    return out
