"""
frilab: a Monte Carlo laboratory for finitary random interlacements on Z^d, d >= 4.

Subpackages follow the computation: lattice primitives, length laws,
potential theory, FRI sampling, percolation, layer exploration and the
coarse-grained algorithm; `harness` runs experiments described in JSON.
"""

__version__ = "0.1.0"
