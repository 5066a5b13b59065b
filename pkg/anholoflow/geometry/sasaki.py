"""Sasaki lift of a regular Lagrangian L(x, y) to a d-metric on the chart."""

import logging
from typing import Callable, Optional, Union

import numpy as np

from ..config import NUMERICS_CONFIG
from ..errors import DegenerateMetricError
from ..expressions import Expression, compile_expression
from .dmetric import DMetric, NConnection, block_det, block_inverse
from .grid import GridChart

logger = logging.getLogger(__name__)

LagrangianLike = Union[str, float, Expression, Callable[..., np.ndarray], np.ndarray]


def _lagrangian_field(L: LagrangianLike, chart: GridChart) -> np.ndarray:
    coords = chart.coordinate_dict()
    if isinstance(L, np.ndarray):
        return chart.check_field(L, 'Lagrangian')
    if isinstance(L, (str, int, float)):
        L = compile_expression(L, allowed=chart.names)
    return np.asarray(L(**coords), dtype=float) * np.ones(chart.shape)


def spray_nconnection(L_field: np.ndarray, h: np.ndarray, chart: GridChart) -> NConnection:
    """N^a_j = dG^a/dy^j with G^a = 1/4 h^ab (y^k d2L/dy^b dx^k - dL/dx^b)."""
    coords = chart.coordinates()
    y = (coords[2], coords[3])
    dL_y = [chart.derivative(L_field, 2 + b) for b in (0, 1)]
    inner = np.empty((2,) + chart.shape)
    for b in (0, 1):
        inner[b] = (sum(y[k] * chart.derivative(dL_y[b], k) for k in (0, 1))
                    - chart.derivative(L_field, b))
    spray = 0.25 * np.einsum('ab...,b...->a...', block_inverse(h), inner)
    N = np.stack([chart.derivative(spray, 2 + j) for j in (0, 1)])   # N[j, a]
    return NConnection(N, chart)


def sasaki_lift(L: LagrangianLike, chart: GridChart,
                n_source: Optional[Union[str, NConnection, np.ndarray]] = 'spray',
                signature: str = 'riemannian',
                delta_nd: float = NUMERICS_CONFIG['delta_nd']) -> DMetric:
    """d-metric with h_ab = 1/2 d2L/dy^a dy^b and g_ij = h_ab on matching indices.

    ``n_source`` is ``'spray'`` for the canonical N-connection of the
    Lagrangian, or user coefficients (NConnection or array N[i, a]), which
    always take precedence.
    """
    L_field = _lagrangian_field(L, chart)
    dL = [chart.derivative(L_field, 2 + b) for b in (0, 1)]
    h = np.empty((2, 2) + chart.shape)
    for a in (0, 1):
        for b in (0, 1):
            h[a, b] = 0.5 * chart.derivative(dL[b], 2 + a)
    off = 0.5 * (h[0, 1] + h[1, 0])
    h[0, 1] = off
    h[1, 0] = off

    det = np.abs(block_det(h))
    if det.min() < delta_nd:
        raise DegenerateMetricError(
            f"Lagrangian is not regular: |det d2L/dy dy| reaches {det.min():.3e}",
            details={'min_abs_det': float(det.min())})

    if isinstance(n_source, NConnection):
        n_conn = n_source
    elif isinstance(n_source, np.ndarray):
        n_conn = NConnection(n_source, chart)
    else:
        n_conn = spray_nconnection(L_field, h, chart)
        logger.debug(f"spray N-connection max |N| = {np.max(np.abs(n_conn.N)):.3e}")
    return DMetric(h.copy(), h, n_conn, signature, delta_nd)
