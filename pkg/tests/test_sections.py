import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gravvortex import (Divisor, InvalidDivisorError, OracleRefused, Stability, build_section,
                        formal_section, git_classify, hilbert_mumford_oracle, make_torus_grid)
from gravvortex.errors import ConfigurationError, SectionConstructionError
from gravvortex.geometry import stereographic
from gravvortex.sections import (INF, chordal_distance, closed_cstar_orbit, is_cstar_fixed_point,
                                 theta1)


def theta1_product(z, modulus, factors=60):
    # Jacobi triple product, independent of the q-series
    q = cmath.exp(1j * math.pi * modulus)
    out = 2 * q**0.25 * np.sin(z)
    for n in range(1, factors):
        out = out * (1 - q ** (2 * n)) * (1 - 2 * q ** (2 * n) * np.cos(2 * z) + q ** (4 * n))
    return out


@pytest.mark.parametrize("modulus", [1j, 0.5 + 0.8j, -0.2 + 2j])
def test_theta1_against_triple_product(modulus, rng):
    z = rng.normal(size=20) + 1j * rng.normal(size=20) * 0.5
    assert np.abs(theta1(z, modulus) - theta1_product(z, modulus)).max() < 1e-12


def test_divisor_validation():
    with pytest.raises(InvalidDivisorError):
        Divisor((0j, 1 + 0j), (1,))
    with pytest.raises(InvalidDivisorError):
        Divisor((0j,), (0,))
    with pytest.raises(InvalidDivisorError):
        Divisor((1j, 1j + 1e-12), (1, 1))
    with pytest.raises(InvalidDivisorError):
        Divisor((), ())
    with pytest.raises(InvalidDivisorError):
        Divisor.from_json({"points": ["infinity"], "multiplicities": [1]})


def test_divisor_json_round_trip():
    d = Divisor((0j, INF, 1 - 2j), (2, 1, 3))
    back = Divisor.from_json(d.to_json())
    assert back.points == d.points and back.multiplicities == d.multiplicities
    assert back.degree == 6


def test_chordal_distance_at_infinity():
    assert chordal_distance(INF, INF) == 0
    assert math.isclose(chordal_distance(0j, INF), 1.0)


def test_sphere_density_normalized_and_vanishing(sphere24):
    d = Divisor((0.5 + 0.5j, -1.0 + 0j), (2, 1))
    sec = build_section(d, sphere24)
    assert sec.degree == 3
    assert sec.fine_density.max() <= 1 + 1e-12
    assert sec.fine_density.max() > 0.99
    assert np.all(sec.evaluate(np.array([0.5 + 0.5j, -1.0 + 0j])) < 1e-20)


def test_symmetric_density_closed_form(sphere16):
    sec = build_section(Divisor((0j, INF), (2, 2)), sphere16)
    theta = sphere16.nodes[..., 0]
    assert np.abs(sec.density.values - np.sin(theta) ** 4).max() < 1e-12


def test_density_is_pullback_of_chordal_distance(sphere16):
    # |phi|^2 for a single simple zero at p is proportional to squared chordal distance to p
    p = 0.7 - 0.2j
    sec = build_section(Divisor((p,), (1,)), sphere16)
    z = stereographic(sphere16)
    chord = np.vectorize(lambda w: chordal_distance(w, p))(z) ** 2
    ratio = sec.density.values / chord
    assert np.ptp(ratio) < 1e-10 * ratio.max()


def test_torus_section_periodic_and_vanishing(torus16):
    modulus = torus16.lattice_modulus
    sec = build_section(Divisor((0.3 + 0.4j, 0.7 + 0.1j), (1, 2)), torus16)
    w = np.array([0.11 + 0.23j, 0.5 + 0.9j])
    base = sec.evaluate(w)
    assert np.allclose(sec.evaluate(w + 1), base, rtol=1e-10)
    assert np.allclose(sec.evaluate(w + modulus), base, rtol=1e-10)
    assert np.all(sec.evaluate(np.array([0.3 + 0.4j, 0.7 + 0.1j])) < 1e-20)
    assert sec.fine_density.max() <= 1 + 1e-12


def test_torus_rejects_infinity(torus16):
    with pytest.raises((InvalidDivisorError, SectionConstructionError, ConfigurationError)):
        build_section(Divisor((INF,), (1,)), torus16)


def test_scaled_section(sphere16):
    sec = build_section(Divisor((0j,), (1,)), sphere16)
    big = sec.scaled(3.0)
    assert np.allclose(big.density.values, 3 * sec.density.values)
    assert big.normalization == pytest.approx(3 * sec.normalization)


def test_formal_section(torus16):
    sec = formal_section(torus16, 0.5, 2)
    assert sec.degree == 2 and np.all(sec.fine_density == 0.5)
    with pytest.raises(ConfigurationError):
        formal_section(torus16, 0.0)


def _div(mult, rng):
    pts = tuple(complex(*rng.normal(size=2)) for _ in mult)
    return Divisor(pts, tuple(mult))


def test_worked_classes(rng):
    assert git_classify(_div([3, 1], rng)).kind is Stability.UNSTABLE
    assert git_classify(_div([2, 2], rng)).kind is Stability.STRICTLY_POLYSTABLE
    assert git_classify(_div([2, 1, 1], rng)).kind is Stability.SEMISTABLE_NOT_POLYSTABLE
    assert git_classify(_div([1, 1, 1, 1], rng)).kind is Stability.STABLE
    assert git_classify(_div([2, 2, 1], rng)).kind is Stability.STABLE
    # a double point on a degree-2 form: the orbit degenerates, unstable
    assert git_classify(_div([2], rng)).kind is Stability.UNSTABLE


def test_witness_points_at_top_multiplicity():
    d = Divisor((1j, 2 + 0j, INF), (1, 3, 1))
    cls = git_classify(d)
    assert cls.witness["points"] == [2 + 0j] and cls.witness["multiplicity"] == 3
    assert cls.to_json()["class"] == "Unstable"


def test_oracle_agrees_on_small_degrees(rng):
    for N in range(1, 5):
        for mult in {tuple(sorted(p, reverse=True)) for p in _partitions(N)}:
            for _ in range(5):
                d = _div(mult, rng)
                assert hilbert_mumford_oracle(d).kind == git_classify(d).kind, d


def _partitions(n, largest=None):
    largest = largest or n
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


def test_oracle_refuses_large_degree(rng):
    with pytest.raises(OracleRefused):
        hilbert_mumford_oracle(_div([3, 3, 3], rng))


def test_cstar_orbits():
    fixed = Divisor((0j, INF), (2, 2))
    assert is_cstar_fixed_point(fixed) and closed_cstar_orbit(fixed)
    assert closed_cstar_orbit(Divisor((1 + 0j, 2j, 3 + 0j), (1, 1, 1)))
    assert not closed_cstar_orbit(Divisor((0j, 1 + 0j), (2, 1)))
    assert not closed_cstar_orbit(Divisor((INF, 1 + 0j, 2 + 0j), (2, 1, 1)))
    assert not is_cstar_fixed_point(Divisor((0j, 1 + 0j), (2, 2)))


mult_strategy = st.lists(st.integers(1, 4), min_size=1, max_size=4)


@settings(max_examples=40, deadline=None)
@given(mult=mult_strategy, seed=st.integers(0, 10**6),
       a=st.complex_numbers(max_magnitude=3), b=st.complex_numbers(max_magnitude=3))
def test_classification_is_moebius_invariant(mult, seed, a, b):
    d = _div(mult, np.random.default_rng(seed))
    matrix = ((1 + a * b, a), (b, 1))   # determinant 1
    moved = d.moebius(matrix)
    assert git_classify(moved).kind == git_classify(d).kind


@settings(max_examples=30, deadline=None)
@given(mult=mult_strategy, seed=st.integers(0, 10**6))
def test_classification_depends_only_on_multiplicities(mult, seed):
    kinds = {git_classify(_div(mult, np.random.default_rng(seed + k))).kind for k in range(3)}
    assert len(kinds) == 1


def test_oracle_handles_points_matching_its_probes():
    # the oracle's own probe points coincide with these divisor points
    rng = np.random.default_rng(0)
    d = Divisor(tuple(complex(*rng.normal(size=2)) for _ in range(3)), (1, 1, 1))
    assert hilbert_mumford_oracle(d, seed=0).kind is Stability.STABLE
