#!/usr/bin/env python3
"""
Tests for trajectory clouds and the FRI samplers.
"""

import math

import numpy as np
import pytest

from frilab.errors import BudgetExhaustedError, SamplerDiagnostic
from frilab.fri import (
    MonotoneCloud,
    TrajectoryCloud,
    default_margin,
    expected_hit_count,
    occupied_graph,
    sample_conditioned_hit,
    sample_hitting,
    sample_window,
    thin,
)
from frilab.lattice import Box, PointSet, RngStream, Trajectory
from frilab.laws import Dirac, Geometric
from frilab.models import PotentialConfig

ORIGIN = (0, 0, 0, 0)


@pytest.fixture
def cloud():
    """Three hand-built trajectories along the first axis."""
    return TrajectoryCloud.from_trajectories(4, [
        Trajectory(ORIGIN, [0, 0]),
        Trajectory((5, 0, 0, 0), [1]),
        Trajectory((2, 1, 0, 0), [3, 1]),
    ], [{'i': 0}, {'i': 1}, {'i': 2}])


def points(*pts):
    return PointSet.from_points(list(pts), 4)


def test_first_entry_and_restrictions(cloud):
    A = points((2, 0, 0, 0), (4, 0, 0, 0))
    times, _ = cloud.first_entry(A)
    assert times.tolist() == [2, 1, 1]
    assert cloud.hit_mask(points((9, 9, 9, 9))).tolist() == [False, False, False]

    restricted = cloud.restrict(A, points((5, 0, 0, 0)))
    assert [e.provenance['i'] for e in restricted.entries] == [0, 2]

    through_two = cloud.restrict_hitting(A, points((2, 0, 0, 0)))
    assert len(through_two) == 2
    with pytest.raises(ValueError):
        cloud.restrict_hitting(A, points((7, 0, 0, 0)))

    assert cloud.count_by_entry_point(A) == {(2, 0, 0, 0): 2, (4, 0, 0, 0): 1}


def test_local_times(cloud):
    assert cloud.local_time((2, 0, 0, 0)) == 2
    assert cloud.local_time((1, 0, 0, 0)) == 2
    assert cloud.local_times(np.array([[2, 0, 0, 0], [9, 0, 0, 0]])).tolist() == [2, 0]
    assert TrajectoryCloud.empty(4).local_times(np.array([[0, 0, 0, 0]])).tolist() == [0]


def test_multiset_algebra(cloud):
    doubled = cloud + cloud
    assert len(doubled) == 6
    assert doubled.multiplicity(Trajectory(ORIGIN, [0, 0])) == 2
    assert doubled.difference(cloud) == cloud
    assert cloud.issubmultiset(doubled)
    assert not doubled.issubmultiset(cloud)
    assert cloud.canonical() == cloud
    assert cloud.vertices() == points(ORIGIN, (1, 0, 0, 0), (2, 0, 0, 0), (4, 0, 0, 0),
                                      (5, 0, 0, 0), (2, 1, 0, 0))


def test_occupied_graph(cloud):
    graph = occupied_graph(cloud)
    assert graph.n_edges == 4
    assert graph.has_edge((1, 0, 0, 0), (2, 0, 0, 0))
    assert graph.has_edge((2, 0, 0, 0), (1, 0, 0, 0))
    assert not graph.has_edge(ORIGIN, (2, 0, 0, 0))

    clipped = occupied_graph(cloud, Box.centered(ORIGIN, 2))
    assert clipped.n_edges == 3
    assert len(clipped.vertices) == 4
    assert clipped.edge_points().shape == (3, 2, 4)


def test_dump_and_load(cloud, tmp_path):
    path = tmp_path / "cloud.ndjson"
    assert cloud.dump_ndjson(path) == 3
    loaded = TrajectoryCloud.load_ndjson(path)
    assert loaded == cloud
    assert sorted(e.provenance['i'] for e in loaded.entries) == [0, 1, 2]


def test_require_complete():
    flagged = TrajectoryCloud(4, diagnostics=[SamplerDiagnostic('test', 'budget')])
    assert flagged.flagged
    with pytest.raises(BudgetExhaustedError):
        flagged.require_complete()


def test_default_margin():
    assert default_margin(Dirac(16)) == 16
    assert default_margin(Dirac(0)) == 0


def test_window_sample_point_trajectories_have_density_u():
    """Test that zero-length trajectories put Poisson(u) mass on every vertex."""
    u = 2.0
    window = Box.centered(ORIGIN, 3)
    sample = sample_window(u, Dirac(0), window, RngStream(1), margin=0)
    assert all(t.length == 0 for t in sample)
    mean = sample.local_times(window.points()).mean()
    assert mean == pytest.approx(u, abs=5 * math.sqrt(u / window.volume()))


def test_window_sample_count():
    rho = Geometric.with_mean(1.0)
    window = Box.centered(ORIGIN, 2)
    sample = sample_window(1.0, rho, window, RngStream(2), margin=0)
    expected = 1.0 / (rho.mu1 + 1) * window.volume()
    assert abs(len(sample) - expected) < 5 * math.sqrt(expected)
    assert all(window.contains(t.start) for t in sample)


def test_window_sample_is_reproducible():
    rho = Geometric.with_mean(2.0)
    window = Box.centered(ORIGIN, 1)
    a = sample_window(0.5, rho, window, RngStream(3), margin=2)
    b = sample_window(0.5, rho, window, RngStream(3), margin=2)
    assert a == b
    assert sample_window(0.0, rho, window, RngStream(3)).trajectories == []
    with pytest.raises(ValueError):
        sample_window(-1.0, rho, window, RngStream(3))


def test_hitting_sample_first_entry_provenance():
    """Test that every sampled trajectory first enters A at its hit point at time m."""
    A = PointSet.from_points(Box.centered(ORIGIN, 1).points(), 4)
    sample = sample_hitting(2.0, Geometric.with_mean(4.0), A, RngStream(4))
    assert len(sample) > 0
    for entry in sample.entries:
        traj, prov = entry.trajectory, entry.provenance
        assert traj.hitting_time(A) == prov['m']
        assert list(traj.point(prov['m'])) == prov['hit_point']
        assert traj.length == prov['m'] + prov['l']


def test_hitting_sample_count_matches_rho_capacity():
    """Test E|X[A]| = u cap^(rho)(A)."""
    u = 2.0
    rho = Geometric.with_mean(4.0)
    A = PointSet.from_points(Box.centered(ORIGIN, 1).points(), 4)
    expected = expected_hit_count(u, rho, A, PotentialConfig(mc_walks=400), RngStream(5).child('cap'))
    counts = [len(sample_hitting(u, rho, A, RngStream(5).child('draw', i))) for i in range(10)]
    mean = float(np.mean(counts))
    spread = 5 * math.sqrt(expected.value / len(counts)) + 5 * expected.stderr
    assert abs(mean - expected.value) < spread


@pytest.mark.slow
def test_window_and_hitting_samplers_agree():
    """Test that the window sample restricted to X[A] has the hitting sample's mean size."""
    u = 2.0
    rho = Geometric.with_mean(4.0)
    window = Box.centered(ORIGIN, 1)
    A = PointSet.from_points(window.points(), 4)
    window_counts = [len(sample_window(u, rho, window, RngStream(6).child('w', i), margin=12).restrict(A))
                     for i in range(3)]
    hitting_counts = [len(sample_hitting(u, rho, A, RngStream(6).child('h', i))) for i in range(3)]
    a, b = np.mean(window_counts), np.mean(hitting_counts)
    assert abs(a - b) < 5 * math.sqrt((a + b) / 3)


def test_hitting_band_restricts_lengths():
    A = points(ORIGIN)
    sample = sample_hitting(20.0, Geometric.with_mean(6.0), A, RngStream(7), band=(5, 10))
    assert all(5 <= t.length <= 10 for t in sample)


def test_hitting_rejects_empty_set():
    with pytest.raises(ValueError):
        sample_hitting(1.0, Dirac(3), PointSet.empty(4), RngStream(8))


def test_conditioned_hit():
    A = points(ORIGIN, (1, 0, 0, 0))
    traj, diagnostic, split = sample_conditioned_hit(ORIGIN, A, Geometric.with_mean(5.0),
                                                     np.random.default_rng(9))
    assert diagnostic is None
    assert traj.hitting_time(A) == split['m']
    assert traj.point(split['m']) == ORIGIN
    with pytest.raises(ValueError):
        sample_conditioned_hit((3, 0, 0, 0), A, Dirac(2), np.random.default_rng(9))


def test_conditioned_hit_budget_exhausted():
    """Test that an interior hit point of a solid ball exhausts a one-proposal budget."""
    A = PointSet.from_points(Box.centered(ORIGIN, 1).points(), 4)
    traj, diagnostic, split = sample_conditioned_hit(ORIGIN, A, Dirac(10000), np.random.default_rng(10),
                                                     budget=1)
    assert traj is None
    assert diagnostic.attempts == 1
    assert diagnostic.hit_point == [0, 0, 0, 0]
    assert split == {}


def test_thin(cloud):
    assert len(thin(cloud, 0.0, RngStream(11))) == 0
    assert thin(cloud, 1.0, RngStream(11)) == cloud
    with pytest.raises(ValueError):
        thin(cloud, 1.5, RngStream(11))


def test_monotone_cloud_is_nested():
    """Test that clouds at increasing intensities are nested."""
    mono = MonotoneCloud(Geometric.with_mean(2.0), Box.centered(ORIGIN, 1), RngStream(12), margin=2)
    low = mono.at(0.5)
    high = mono.at(1.5)
    assert mono.n_layers == 2
    assert low.issubmultiset(high)
    assert mono.at(0.5) == low
    levels = mono.levels()
    assert np.all(levels > 0) and np.all(levels <= 1.5)
    _, ordered = mono.by_level()
    assert np.all(np.diff(ordered) >= 0)
