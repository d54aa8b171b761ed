"""Tests for atomic / grid / hybrid measures."""

import json
import math

import numpy as np
import pytest

from frogmodel.measures import (
    AtomicMeasure,
    GridDensity,
    HybridMeasure,
    discretize_density,
    interval_mass,
    measure_from_json,
    to_json,
    total_mass,
)


def test_total_mass_examples():
    assert total_mass(AtomicMeasure([0.5, 0.7], [1.0, 2.0])) == 3.0
    assert total_mass(AtomicMeasure([], [])) == 0.0
    assert total_mass(GridDensity.uniform(0, 1, 1.0, 0.01)) == pytest.approx(1.0, rel=1e-15)


def test_atoms_normalized():
    a = AtomicMeasure([0.7, 0.5, 0.5, 0.2], [2.0, 1.0, 0.5, 0.0])
    assert np.array_equal(a.positions, [0.5, 0.7])
    assert np.array_equal(a.masses, [1.5, 2.0])
    with pytest.raises(ValueError):
        AtomicMeasure([0.1], [-1.0])
    with pytest.raises(ValueError):
        AtomicMeasure([np.inf], [1.0])


def test_interval_mass_examples():
    g = GridDensity.uniform(0, 1, 1.0, 0.01)
    assert interval_mass(g, 0, 0.25) == pytest.approx(0.25, abs=1e-15)
    atom = AtomicMeasure([0.25], [1.0])
    assert interval_mass(atom, 0, 0.25) == 1.0          # (0, 0.25] grabs the atom
    assert interval_mass(atom, 0.25, 0.5) == 0.0        # (0.25, 0.5] does not
    assert interval_mass(atom, 0.25, 0.5, "[)") == 1.0
    assert interval_mass(atom, 0.25, 0.25, "[]") == 1.0
    assert interval_mass(atom, 0.25, 0.25, "()") == 0.0
    span = GridDensity.uniform(0.9, 1.3, 0.4, 0.001)
    assert interval_mass(span, 0.9, 1.0) == pytest.approx(0.1, abs=1e-12)


def test_interval_additivity_property():
    # splitting (a, b] at arbitrary interior points must preserve mass
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = rng.integers(1, 60)
        g = GridDensity(rng.uniform(-2, 0), 10 ** rng.uniform(-3, -0.5), rng.random(n))
        atoms = AtomicMeasure(rng.uniform(-2, 2, 5), rng.random(5))
        m = HybridMeasure(g, atoms)
        a, b = sorted(rng.uniform(-3, 3, 2))
        cuts = np.concatenate([[a], np.sort(rng.uniform(a, b, 6)), [b]])
        parts = math.fsum(interval_mass(m, lo, hi) for lo, hi in zip(cuts[:-1], cuts[1:]))
        whole = interval_mass(m, a, b)
        assert parts == pytest.approx(whole, rel=1e-12, abs=1e-15)


def test_discretize_uniform_quarter():
    g = GridDensity.uniform(0, 1, 1.0, 0.01)
    d = discretize_density(g, 0.25)
    assert np.allclose(d.positions, [0.25, 0.5, 0.75, 1.0])
    assert np.allclose(d.masses, 0.25, rtol=1e-14)
    one = discretize_density(g, 1.0)
    assert len(one) == 1 and one.positions[0] == 1.0
    assert one.masses[0] == pytest.approx(1.0, rel=1e-14)


def test_discretize_triangular():
    # density 2x on [0, 1]: blocks (0, 1/2] and (1/2, 1] carry 1/4 and 3/4
    tri = GridDensity.from_function(lambda x: 2 * x, 0, 1, 0.001)
    d = discretize_density(tri, 0.5)
    assert np.allclose(d.positions, [0.5, 1.0])
    assert d.masses[0] == pytest.approx(0.25, rel=1e-12)
    assert d.masses[1] == pytest.approx(0.75, rel=1e-12)


def test_discretize_preserves_total_mass():
    rng = np.random.default_rng(21)
    for _ in range(30):
        n = int(rng.integers(10, 3000))
        g = GridDensity(0.0, 1e-3, rng.random(n))
        spacing = float(rng.choice([0.25, 0.1, 0.05, 0.013, 1.0]))
        d = discretize_density(g, spacing)
        assert d.total_mass() == pytest.approx(g.total_mass(), rel=1e-12)
    # hybrid input: atoms folded into blocks, block index by right-closed rule
    h = HybridMeasure(GridDensity.uniform(0, 1, 1.0, 0.01), AtomicMeasure([0.25, 0.30], [1.0, 2.0]))
    d = discretize_density(h, 0.25)
    assert d.total_mass() == pytest.approx(4.0, rel=1e-12)
    assert d.interval_mass(0, 0.25) == pytest.approx(1.25, rel=1e-12)   # atom at 0.25 in block 1
    assert d.interval_mass(0.25, 0.5) == pytest.approx(2.25, rel=1e-12)


def test_json_round_trip_bit_exact():
    rng = np.random.default_rng(3)
    a = AtomicMeasure(rng.standard_normal(8), rng.random(8))
    a2 = measure_from_json(to_json(a))
    assert np.array_equal(a2.positions, a.positions) and np.array_equal(a2.masses, a.masses)
    g = GridDensity(rng.standard_normal(), 10 ** rng.uniform(-6, 0), rng.random(40))
    g2 = measure_from_json(to_json(g))
    assert g2.left == g.left and g2.dx == g.dx and np.array_equal(g2.values, g.values)
    h = HybridMeasure(g, a)
    h2 = measure_from_json(to_json(h))
    assert h2.to_dict() == h.to_dict()
    # serialized form matches the documented schema
    doc = json.loads(to_json(a))
    assert set(doc) == {"atoms"} and all(len(p) == 2 for p in doc["atoms"])


def test_grid_validation():
    with pytest.raises(ValueError):
        GridDensity(0, -0.1, [1.0])
    with pytest.raises(ValueError):
        GridDensity(0, 0.1, [[1.0]])
    with pytest.raises(ValueError):
        GridDensity(0, 0.1, [-1.0])
    with pytest.raises(ValueError):
        GridDensity.uniform(0, 1, 1.0, 0.3)  # dx does not divide the span
