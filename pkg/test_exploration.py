#!/usr/bin/env python3
"""
Tests for the layer exploration, the dominating process and the recursion trace.
"""

import math

import pytest

from frilab.exploration import (
    RecursionTrace,
    explore_coupled,
    explore_dominating,
    explore_layers,
    layer_kappas,
    track_recursion,
)
from frilab.fri import TrajectoryCloud, occupied_graph
from frilab.lattice import PointSet, RngStream, Trajectory
from frilab.laws import Dirac, Geometric
from frilab.models import PotentialConfig
from frilab.percolation import build_clusters

ORIGIN = (0, 0, 0, 0)


@pytest.fixture
def chain_cloud():
    """A chain of three trajectories through the origin plus one far away."""
    return TrajectoryCloud.from_trajectories(4, [
        Trajectory(ORIGIN, [0, 0]),
        Trajectory((2, 0, 0, 0), [2]),
        Trajectory((2, 1, 0, 0), [2]),
        Trajectory((9, 9, 9, 9), [0, 0, 0]),
    ])


def test_layers_of_a_fixed_cloud(chain_cloud):
    """Test that the layers recover the origin's cluster one trajectory at a time."""
    record = explore_layers(1.0, Dirac(2), 4, cloud=chain_cloud)
    assert record.sizes() == [(0, 1), (1, 3), (1, 2), (1, 2), (0, 0)]
    assert record.extinct
    assert not record.truncated
    assert len(record.union()) == 3

    clusters = build_clusters(occupied_graph(chain_cloud))
    assert record.explored_vertices() == clusters.cluster_of(ORIGIN)


def test_layers_truncate(chain_cloud):
    record = explore_layers(1.0, Dirac(2), 4, cloud=chain_cloud, max_layers=2)
    assert record.truncated
    assert record.n_layers == 3


def test_zero_intensity_is_extinct_at_once():
    record = explore_layers(0.0, Dirac(2), 4, RngStream(1))
    assert record.sizes() == [(0, 1), (0, 0)]
    assert record.extinct
    with pytest.raises(ValueError):
        explore_layers(-1.0, Dirac(2), 4, RngStream(1))
    with pytest.raises(ValueError):
        explore_layers(1.0, Dirac(2), 4, RngStream(1), max_layers=0)


def test_sampled_layers_avoid_earlier_layers():
    record = explore_layers(0.05, Geometric.with_mean(3.0), 5, RngStream(2), max_layers=6)
    earlier = PointSet.empty(5)
    for k in range(1, record.n_layers):
        assert not any(record.layers[k].hit_mask(earlier))
        assert all(record.layers[k].hit_mask(record.vertex_layers[k - 1]))
        earlier = earlier.union(record.vertex_layers[k - 1])


def test_coupled_exploration_is_dominated():
    """Test that every exploration layer sits inside the dominating layer."""
    plain, primed = explore_coupled(0.05, Geometric.with_mean(3.0), 5, RngStream(3), max_layers=6)
    assert plain.n_layers == primed.n_layers
    for a, b in zip(plain.layers, primed.layers):
        assert a.issubmultiset(b)
    for k in range(plain.n_layers):
        assert plain.vertex_layers[k].issubset(primed.vertex_layers[k])


def test_dominating_process_alone_matches_coupled_run():
    _, primed = explore_coupled(0.05, Geometric.with_mean(3.0), 5, RngStream(8), max_layers=4)
    alone = explore_dominating(0.05, Geometric.with_mean(3.0), 5, RngStream(8), max_layers=4)
    assert alone.sizes() == primed.sizes()
    assert alone.explored_vertices() == primed.explored_vertices()


def test_layer_kappas():
    record = explore_layers(0.0, Dirac(2), 5, RngStream(4))
    kappas = layer_kappas(record, Dirac(2), RngStream(5), PotentialConfig(mc_walks=50))
    assert len(kappas) == record.n_layers
    assert kappas[0].value > 0
    assert kappas[-1].value == 0.0


def test_recursion_ratios():
    trace = RecursionTrace(W=[2.0, 1.0, 0.0], W_stderr=[0.0] * 3, V=[1.0, 0.5, 0.0], V_stderr=[0.0] * 3,
                           replicas=2)
    ratios = trace.ratios()
    assert ratios['W_ratio'] == [0.5, 0.0]
    assert ratios['V_ratio'] == [0.25, 0.0]
    rows = trace.rows()
    assert len(rows) == 3
    assert math.isnan(rows[-1]['W_ratio'])


def test_track_recursion():
    trace = track_recursion(0.05, Dirac(3), 5, 3, RngStream(6), max_layers=3,
                            cfg=PotentialConfig(mc_walks=50))
    assert len(trace.W) == 4
    assert len(trace.V) == 4
    assert trace.V[0] == 1.0
    assert trace.V_stderr[0] == 0.0
    assert trace.replicas == 3
    with pytest.raises(ValueError):
        track_recursion(0.05, Dirac(3), 5, 1, RngStream(6))


def test_track_recursion_d4_normalization_needs_long_walks():
    with pytest.raises(ValueError):
        track_recursion(0.0, Dirac(1), 4, 2, RngStream(7), max_layers=1, cfg=PotentialConfig(mc_walks=10))
