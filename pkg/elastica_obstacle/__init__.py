"""Elastica Obstacle Package

Obstacle problems for the generalized p-elastic energy of graphs: a constrained
solver, the explicit free p-elastica, sharp existence thresholds and post-solve
diagnostics.
"""

__version__ = "0.1.0"
