#!/usr/bin/env python3
"""
Tests for Green's function, capacities and equilibrium measures.

Reference values: the simple random walk returns to the origin with
probability 0.193206 in d = 4 and 0.135178 in d = 5, so g(0, 0) is
1.239467 and 1.156308 respectively.
"""

import math

import numpy as np
import pytest

from frilab.errors import MemoryCapError
from frilab.lattice import PointSet, RngStream, Trajectory
from frilab.laws import Dirac, Geometric
from frilab.models import PotentialConfig
from frilab.workers import get_worker_pool
from frilab.potential import (
    capacity,
    equilibrium_measure,
    estimate_epsilon,
    first_entry_times,
    green,
    green_constant,
    green_table,
    hitting_probability,
    kappa_rho,
    phi_rho,
    rho_capacity,
    rho_capacity_upper_bound,
    solve_ball,
    truncated_capacity,
    visit_counts,
)

G0 = {4: 1.239467, 5: 1.156308}
EXACT = PotentialConfig(method='exact-dirichlet', annulus_radius=10)


def single(d):
    return PointSet.from_points([(0,) * d], d)


def test_green_exact_d4():
    """Test the Dirichlet Green's function at the origin against the known return probability."""
    est = green((0, 0, 0, 0), (0, 0, 0, 0), EXACT)
    assert est.value <= G0[4] + 1e-3
    assert est.value + est.bias_bound >= G0[4] - 1e-3


def test_green_monte_carlo_d5():
    cfg = PotentialConfig(mc_walks=2000, escape_cutoff_steps=2000)
    est = green((0,) * 5, (0,) * 5, cfg, RngStream(1))
    assert est.n_samples == 2000
    assert abs(est.value - G0[5]) < 4 * est.stderr + est.bias_bound + 0.01


def test_capacity_of_a_point_exact():
    """Test cap({0}) = 1 / g(0, 0)."""
    est = capacity(single(4), EXACT)
    assert est.value == pytest.approx(1 / G0[4], abs=0.01)
    assert est.value >= 1 / G0[4] - 1e-3


def test_capacity_of_a_point_monte_carlo():
    cfg = PotentialConfig(mc_walks=4000, escape_cutoff_steps=2000)
    est = capacity(single(5), cfg, RngStream(2))
    assert est.value == pytest.approx(1 / G0[5], abs=0.03)


def test_equilibrium_measure_properties():
    A = PointSet.from_points([(i, 0, 0, 0) for i in range(4)], 4)
    measure = equilibrium_measure(A, EXACT)
    assert len(measure.weights) == 4
    assert np.all(measure.weights > 0) and np.all(measure.weights <= 1)
    assert measure.normalized().sum() == pytest.approx(1.0)
    # endpoints escape more easily than interior points
    assert measure.weight((0, 0, 0, 0)) > measure.weight((1, 0, 0, 0))
    assert measure.weight((9, 9, 9, 9)) == 0.0
    assert measure.total().value == pytest.approx(measure.weights.sum())


def test_empty_set_rejected():
    with pytest.raises(ValueError):
        capacity(PointSet.empty(4))
    with pytest.raises(ValueError):
        equilibrium_measure(PointSet.empty(4))


def test_truncated_capacity_zero_cutoff_is_size():
    A = PointSet.from_points([(i, 0, 0, 0, 0) for i in range(7)], 5)
    assert truncated_capacity(A, 0).value == 7.0
    with pytest.raises(ValueError):
        truncated_capacity(A, -1)


def test_truncated_capacity_decreases_in_cutoff():
    A = PointSet.from_points([(i, 0, 0, 0, 0) for i in range(5)], 5)
    cfg = PotentialConfig(mc_walks=2000)
    short = truncated_capacity(A, 2, cfg, RngStream(3).child('short'))
    long = truncated_capacity(A, 500, cfg, RngStream(3).child('long'))
    assert long.value < short.value <= 5.0


def test_rho_capacity_of_zero_length_law_is_size():
    """Test that trajectories of length 0 leave every point escaping."""
    A = PointSet.from_points([(i, 0, 0, 0, 0) for i in range(3)], 5)
    est = rho_capacity(A, Dirac(0), PotentialConfig(mc_walks=10), RngStream(4))
    assert est.value == 3.0
    assert est.stderr == 0.0


def test_rho_capacity_between_capacity_and_size():
    A = PointSet.from_points([(i, 0, 0, 0, 0) for i in range(5)], 5)
    cfg = PotentialConfig(mc_walks=2000, escape_cutoff_steps=2000)
    rho_cap = rho_capacity(A, Geometric.with_mean(3.0), cfg, RngStream(5).child('rho'))
    cap = capacity(A, cfg, RngStream(5).child('cap'))
    assert cap.value - 4 * cap.stderr <= rho_cap.value + 4 * rho_cap.stderr
    assert rho_cap.value <= 5.0


def test_rho_capacity_upper_bound_dominates():
    A = PointSet.from_points([(i, 0, 0, 0, 0) for i in range(5)], 5)
    cfg = PotentialConfig(mc_walks=2000)
    rho = Geometric.with_mean(3.0)
    rho_cap = rho_capacity(A, rho, cfg, RngStream(6).child('rho'))
    upper = rho_capacity_upper_bound(A, rho, 4, cfg, RngStream(6).child('upper'))
    assert upper.value + 4 * upper.stderr >= rho_cap.value - 4 * rho_cap.stderr


def test_kappa_methods_agree():
    """Test that the direct and size-biased kappa estimators agree for a Dirac law."""
    A = PointSet.from_points([(0, 0, 0, 0, 0), (1, 0, 0, 0, 0)], 5)
    cfg = PotentialConfig(mc_walks=3000)
    rho = Dirac(10)
    direct = kappa_rho(A, rho, cfg, RngStream(7).child('direct'), method='direct')
    biased = kappa_rho(A, rho, cfg, RngStream(7).child('biased'), method='size-biased')
    spread = math.sqrt(direct.stderr ** 2 + biased.stderr ** 2)
    assert abs(direct.value - biased.value) <= 4 * spread + 1e-9
    with pytest.raises(ValueError):
        kappa_rho(A, Dirac(0), cfg, RngStream(7))
    with pytest.raises(ValueError):
        kappa_rho(A, rho, cfg, RngStream(8), method='other')


def test_hitting_probability():
    """Test h(e1, {0}) = 1 - 1 / g(0, 0)."""
    A = single(5)
    assert hitting_probability((0,) * 5, A).value == 1.0
    cfg = PotentialConfig(mc_walks=4000, escape_cutoff_steps=4000)
    est = hitting_probability((1, 0, 0, 0, 0), A, cfg, RngStream(9))
    assert est.value == pytest.approx(1 - 1 / G0[5], abs=0.03)


def test_hitting_probability_exact_d4():
    est = hitting_probability((1, 0, 0, 0), single(4), EXACT)
    assert est.value == pytest.approx(1 - 1 / G0[4], abs=0.01)


def test_green_table_and_phi():
    """Test that phi of a point under a zero-length law is g(0, 0)."""
    cfg = PotentialConfig(mc_walks=10, green_table_radius=6)
    table = green_table(5, 6, cfg.tolerance)
    far = table.lookup(np.array([[20, 0, 0, 0, 0]]))[0]
    assert far == pytest.approx(green_constant(5) * 20.0 ** -3)
    phi = phi_rho(single(5), single(5), Dirac(0), cfg, RngStream(10))
    assert phi.value == pytest.approx(G0[5], abs=0.01)
    assert phi.stderr == 0.0


def test_dirichlet_memory_cap():
    with pytest.raises(MemoryCapError):
        solve_ball(4, 100, np.zeros(4, dtype=np.int64))


def test_dirichlet_fixed_set_must_fit():
    with pytest.raises(ValueError):
        solve_ball(4, 2, np.zeros(4, dtype=np.int64), fixed=PointSet.from_points([(5, 0, 0, 0)], 4))


def test_first_entry_times():
    A = single(4)
    starts = np.zeros((5, 4), dtype=np.int64)
    assert np.all(first_entry_times(starts, A, 10, np.random.default_rng(0), start_time=0) == 0)
    returns = first_entry_times(starts, A, 10, np.random.default_rng(0), start_time=1)
    assert np.all((returns == -1) | ((returns >= 2) & (returns <= 10) & (returns % 2 == 0)))


def test_visit_counts_include_time_zero():
    counts = visit_counts(np.zeros(4), np.zeros(4), 0, 20, np.random.default_rng(1))
    assert np.all(counts == 1)


def test_estimate_epsilon_small():
    cfg = PotentialConfig(mc_walks=1, escape_cutoff_steps=200, subsample_points=64)
    est = estimate_epsilon(5, 1000, 3, cfg, RngStream(11))
    assert len(est.values) == 3
    assert 0 < est.mean <= 1.001
    assert est.variance >= 0
    assert 'relative_spread' in est.concentration
    with pytest.raises(ValueError):
        estimate_epsilon(5, 999, 3, cfg, RngStream(11))
    with pytest.raises(ValueError):
        estimate_epsilon(5, 1000, 1, cfg, RngStream(11))


def test_truncated_capacity_of_a_range_past_the_key_limit():
    """Test that a d = 6 range reaching coordinate 1500 is handled like any other set."""
    line = Trajectory((0,) * 6, [0] * 1500).range_set()
    cfg = PotentialConfig(mc_walks=2, subsample_points=50)
    est = truncated_capacity(line, 64, cfg, RngStream(12))
    assert 0 < est.value <= len(line)
    assert est.n_samples == 100


@pytest.mark.slow
def test_exact_and_monte_carlo_green_agree():
    """Test the Dirichlet g(0, 0) against visit counts of free walks."""
    exact = green((0,) * 4, (0,) * 4, PotentialConfig(method='exact-dirichlet', annulus_radius=16))
    mc = green((0,) * 4, (0,) * 4, PotentialConfig(mc_walks=200_000, escape_cutoff_steps=4096), RngStream(13))
    assert abs(exact.value - mc.value) <= 4 * mc.stderr + exact.bias_bound + mc.bias_bound


@pytest.mark.slow
def test_exact_and_monte_carlo_equilibrium_agree_pointwise():
    """Test that the Dirichlet equilibrium measure matches 10^6 escape walks at every point."""
    A = PointSet.from_points([(0, 0, 0, 0), (1, 0, 0, 0), (2, 0, 0, 0), (0, 1, 0, 0)], 4)
    exact = equilibrium_measure(A, PotentialConfig(method='exact-dirichlet', annulus_radius=16))
    mc = equilibrium_measure(A, PotentialConfig(mc_walks=1_000_000, escape_cutoff_steps=512), RngStream(14))
    np.testing.assert_array_equal(exact.points, mc.points)
    slack = 3 * mc.stderr + exact.bias_bound + mc.bias_bound
    assert np.all(np.abs(exact.weights - mc.weights) <= slack)


@pytest.fixture(scope='module')
def epsilon_4_runs():
    pool = get_worker_pool()
    return tuple(estimate_epsilon(4, T, 100, PotentialConfig(mc_walks=1, escape_cutoff_steps=T, subsample_points=1024),
                                  RngStream(15).child('T', T), pool)
                 for T in (10_000, 100_000))


@pytest.mark.slow
def test_epsilon_4_matches_pi_squared_over_8(epsilon_4_runs):
    _, long = epsilon_4_runs
    assert long.mean == pytest.approx(math.pi ** 2 / 8, rel=0.15)


@pytest.mark.slow
def test_epsilon_4_variance_shrinks_with_length(epsilon_4_runs):
    """Test that the normalized trace capacity concentrates as T grows from 10^4 to 10^5."""
    short, long = epsilon_4_runs
    assert long.variance / short.variance < 1


@pytest.mark.slow
def test_epsilon_5_is_stable_under_doubling():
    """Test that the d = 5 means at T and 2T agree within 10%."""
    pool = get_worker_pool()
    T = 10_000
    runs = [estimate_epsilon(5, length, 24, PotentialConfig(mc_walks=1, escape_cutoff_steps=length, subsample_points=1024),
                             RngStream(16).child('T', length), pool)
            for length in (T, 2 * T)]
    assert runs[1].mean == pytest.approx(runs[0].mean, rel=0.10)
