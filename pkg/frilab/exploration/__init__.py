"""Subcritical layer exploration of the origin's cluster."""

from .layers import (
    LayerRecord,
    RecursionTrace,
    explore_coupled,
    explore_dominating,
    explore_layers,
    layer_kappas,
    track_recursion,
)

__all__ = [
    'LayerRecord', 'RecursionTrace', 'explore_coupled', 'explore_dominating',
    'explore_layers', 'layer_kappas', 'track_recursion',
]
