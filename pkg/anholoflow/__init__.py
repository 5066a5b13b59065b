"""
anholoflow: nonholonomic Ricci-flow geometry on grids.

Subpackages: ``geometry`` (charts, d-metrics, connections, curvature),
``ansatz`` (exact solutions from a generating function), ``flow`` (Ricci
flows and the backward potential), ``spde`` (stochastic porous-media runs).
"""

__version__ = '0.1.0'
