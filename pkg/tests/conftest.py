import math

import numpy as np
import pytest

from gravvortex import Divisor, build_section, make_sphere_grid, make_torus_grid


@pytest.fixture(scope="session")
def sphere16():
    return make_sphere_grid(16)


@pytest.fixture(scope="session")
def sphere24():
    return make_sphere_grid(24)


@pytest.fixture(scope="session")
def torus16():
    return make_torus_grid(16)


@pytest.fixture(scope="session")
def torus24():
    return make_torus_grid(24)


@pytest.fixture(scope="session")
def torus_section24(torus24):
    return build_section(Divisor((0.3 + 0.4j,), (1,)), torus24)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_smooth(grid, rng, scale=0.3, decay=1.0):
    """Band-limited random field with quickly decaying spectrum."""
    c = rng.normal(size=grid.ncoeffs) * np.exp(-decay * np.sqrt(grid.basis.eigenvalues))
    c[0] = 0.0
    c *= scale / max(np.abs(grid.from_coeffs(c)).max(), 1e-300)
    return grid.field_from_coeffs(c)


TWO_PI = 2 * math.pi
