"""Tests for the marked-pattern view of the cascade."""

import math

import numpy as np
import pytest

from frogmodel.colony import sample_wake_threshold
from frogmodel.frog import compute_ustar
from frogmodel.measures import AtomicMeasure, GridDensity, PointPattern
from frogmodel.spatial import (blocks_to_pattern, build_W_from_J,
                               count_in_rectangle, coupling_convergence_report,
                               coupling_report_for_pattern, sample_J,
                               ustar_from_J)
from frogmodel.stats import ks_one_sample, poisson_count_test


@pytest.fixture(scope="module")
def pattern_batch():
    rng = np.random.default_rng(4242)
    f = GridDensity.uniform(0.0, 1.0, 1.0, 0.05)
    return f, [sample_J(f, 0.05, rng) for _ in range(3000)]


def test_sample_count_law():
    rng = np.random.default_rng(7)
    f = GridDensity.uniform(0.0, 1.0, 1.0, 0.1)
    counts = [len(sample_J(f, 0.1, rng)) for _ in range(400)]
    rep = poisson_count_test(counts, 10.0, alpha=1e-3, name="pattern size")
    assert rep.passed, rep

    assert len(sample_J(GridDensity.uniform(0.0, 1.0, 0.0, 0.1), 0.1, rng)) == 0
    with pytest.raises(ValueError):
        sample_J(f, 0.0, rng)


def test_mark_and_position_laws():
    rng = np.random.default_rng(99)
    # triangular density: position CDF is z^2
    f = GridDensity.from_function(lambda z: 2.0 * z, 0.0, 1.0, 0.002)
    r_min = 2e-5
    j = sample_J(f, r_min, rng)
    assert 4e4 < len(j) < 6e4
    assert j.r_min == r_min and np.all(j.rs >= r_min)
    assert np.all((j.zs >= 0.0) & (j.zs <= 1.0))

    mass = f.total_mass()
    pos = ks_one_sample(j.zs, lambda z: np.asarray(f.cumulative(z)) / mass,
                        alpha=1e-3, name="positions")
    assert pos.passed, pos
    mark = ks_one_sample(j.rs, lambda c: 1.0 - r_min / np.maximum(c, r_min),
                         alpha=1e-3, name="marks")
    assert mark.passed, mark


def test_block_threshold_examples():
    mu = GridDensity.uniform(0.0, 1.0, 1.0, 0.1)
    j = PointPattern([0.3], [0.9], r_min=0.1)
    w, cens = build_W_from_J(j, mu, 0.5)
    assert w.tolist() == [pytest.approx(0.6), 0.0]
    assert cens.tolist() == [False, True]

    j2 = PointPattern([0.1, 0.4], [1.0, 2.0], r_min=0.1)
    w2, _ = build_W_from_J(j2, mu, 0.5)
    assert w2[0] == pytest.approx(1.6)

    w3, cens3 = build_W_from_J(PointPattern([], [], r_min=0.1), mu, 0.25)
    assert w3.tolist() == [0.0] * 4 and all(cens3)
    with pytest.raises(ValueError):
        build_W_from_J(j, mu, 0.0)
    with pytest.raises(ValueError):
        build_W_from_J(PointPattern([1.4], [0.5]), mu, 0.5)  # off support


def test_block_threshold_tail_law(pattern_batch):
    """Block thresholds have tail x/(x+r) above twice the floor."""
    f, batch = pattern_batch
    w = np.array([build_W_from_J(j, f, 0.05)[0] for j in batch])  # 20 blocks
    x = 0.05  # per-block mass of the uniform density
    n = w.size
    for r in (0.1, 0.25, 0.6):
        p = x / (x + r)
        phat = float(np.mean(w >= r))
        assert abs(phat - p) < 3.0 * math.sqrt(p * (1.0 - p) / n), (r, phat, p)

    # disjoint blocks carry independent thresholds
    t = (w >= 0.1).astype(float)
    n_rep = w.shape[0]
    for a, b in ((2, 7), (13, 14)):
        rho = np.corrcoef(t[:, a], t[:, b])[0, 1]
        assert abs(rho) <= 3.0 / math.sqrt(n_rep)


def test_rectangle_counts_are_independent_poisson(pattern_batch):
    f, batch = pattern_batch
    rects = [(0.0, 0.4, 0.1, 0.2), (0.5, 1.0, 0.15, 0.6), (0.4, 0.5, 0.1, math.inf)]
    means = [0.4 * (10.0 - 5.0), 0.5 * (1 / 0.15 - 1 / 0.6), 0.1 * 10.0]
    counts = np.array([[count_in_rectangle(j, *rect) for rect in rects]
                       for j in batch])
    for k, mean in enumerate(means):
        rep = poisson_count_test(counts[:, k], mean, alpha=1e-3,
                                 name=f"rectangle {k}")
        assert rep.passed, rep
    for a, b in ((0, 1), (0, 2), (1, 2)):
        rho = np.corrcoef(counts[:, a], counts[:, b])[0, 1]
        assert abs(rho) <= 3.0 / math.sqrt(len(batch))


def test_ustar_examples_and_monotonicity():
    mu = GridDensity.uniform(0.0, 1.0, 1.0, 0.1)
    j = PointPattern([0.3, 0.6], [0.9, 2.0], r_min=0.05)
    assert ustar_from_J(j, 0.5, mu) == 0.3    # 0.9 > 0.5 + 0.3
    assert ustar_from_J(j, 0.7, mu) == 0.6    # first point no longer clears
    assert ustar_from_J(PointPattern([0.3], [0.2], r_min=0.05), 0.5, mu) == 1.0
    with pytest.raises(ValueError):
        ustar_from_J(j, 0.05, mu)             # supply inside the floor

    rng = np.random.default_rng(21)
    f = GridDensity.uniform(0.0, 1.0, 1.0, 0.05)
    big = sample_J(f, 0.02, rng)
    us = [ustar_from_J(big, s, f) for s in np.linspace(0.1, 3.0, 25)]
    assert us == sorted(us)


def test_ustar_law_matches_cascade_prediction():
    """Stopping position read from the pattern vs the pile-walk prediction."""
    rng = np.random.default_rng(1111)
    f = GridDensity.uniform(0.0, 1.0, 1.0, 0.02)
    eta, s, n_rep = 0.02, 0.5, 2000
    n_blocks = 50
    positions = tuple((i + 1) * eta for i in range(n_blocks))
    piles = AtomicMeasure(positions, (eta,) * n_blocks)

    u_pattern, u_piles = [], []
    for _ in range(n_rep):
        u = ustar_from_J(sample_J(f, 0.01, rng), s, f)
        k = min(n_blocks, int(math.ceil(u / eta - 1e-9)))
        u_pattern.append(positions[max(k, 1) - 1])
        ws = [sample_wake_threshold(eta, rng.uniform()) for _ in range(n_blocks)]
        u_piles.append(compute_ustar(ws, piles, s))

    # supply s against total pile mass 1: completion probability telescopes
    p_all = s / (s + 1.0)
    for us in (u_pattern, u_piles):
        frac = np.mean(np.asarray(us) == positions[-1])
        assert abs(frac - p_all) < 3.0 * math.sqrt(p_all * (1 - p_all) / n_rep)

    from frogmodel.stats import ks_two_sample
    rep = ks_two_sample(np.asarray(u_pattern), np.asarray(u_piles),
                        alpha=1e-3, name="stopping position")
    assert rep.passed, rep


def test_coupling_report_single_point():
    mu = GridDensity.uniform(0.0, 1.0, 1.0, 0.1)
    j = PointPattern([0.314], [0.7], r_min=0.05)
    rep = coupling_report_for_pattern(j, mu, [0.05, 0.02, 0.01],
                                      [(0.2, 0.4, 0.5)])
    row = rep.rows[0]
    assert row.count_exact == 1
    assert row.counts == (1, 1, 1)
    assert row.admissible == (True, True, True)
    assert rep.admissible_agree()

    empty = coupling_report_for_pattern(PointPattern([], [], r_min=0.05), mu,
                                        [0.05], [(0.2, 0.4, 0.5)])
    assert empty.rows[0].count_exact == 0 and empty.rows[0].counts == (0,)
    assert empty.admissible_agree()

    with pytest.raises(ValueError):
        coupling_report_for_pattern(j, mu, [0.05], [(0.2, 0.4, 0.05)])
    with pytest.raises(ValueError):
        coupling_report_for_pattern(j, mu, [-0.01], [(0.2, 0.4, 0.5)])

    d = rep.to_dict()
    assert d["rows"][0]["counts"] == [1, 1, 1] and d["admissible_agree"]


def test_coupling_admissible_counts_agree():
    """Whenever the margin condition holds, block counts match exactly."""
    rng = np.random.default_rng(2718)
    f = GridDensity.uniform(0.0, 1.0, 1.0, 0.05)
    rects = [(0.1, 0.45, 0.12), (0.3, 0.9, 0.3), (0.0, 1.0, 0.55)]
    n_adm = 0
    for _ in range(60):
        rep = coupling_convergence_report(f, 0.05, [0.05, 0.01, 0.004],
                                          rects, rng)
        assert rep.admissible_agree()
        n_adm += sum(adm for row in rep.rows for adm in row.admissible)
    assert n_adm > 200  # the margin condition does fire most of the time


def test_blocks_to_pattern_skeleton():
    mu = GridDensity.uniform(0.0, 1.0, 1.0, 0.1)
    j = PointPattern([0.3, 0.62], [0.9, 1.4], r_min=0.05)
    sk = blocks_to_pattern(j, mu, 0.5)
    # two blocks, both carry a point at their right edge
    assert sk.zs.tolist() == [0.5, 1.0]
    assert sk.rs.tolist() == [pytest.approx(0.6), pytest.approx(1.4 - 0.12)]
    assert sk.r_min == 0.05
