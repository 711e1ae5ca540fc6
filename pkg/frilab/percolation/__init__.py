"""Cluster analysis and finite-size threshold estimation."""

from .clusters import ClusterIndex, UnionFind, build_clusters
from .threshold import (
    BisectionStep,
    ThresholdEstimate,
    asymptotic_ratio,
    crossing_curve,
    crossing_level,
    crossing_proxy,
    estimate_threshold,
    replica_crossing_level,
)

__all__ = [
    'ClusterIndex', 'UnionFind', 'build_clusters',
    'BisectionStep', 'ThresholdEstimate', 'asymptotic_ratio', 'crossing_curve', 'crossing_level',
    'crossing_proxy', 'estimate_threshold', 'replica_crossing_level',
]
