"""
Ricci curvature of d-connections and the Einstein / zero-torsion residuals.

Ricci is contracted directly from the frame formula

    R^a_bcd = e_c G^a_bd - e_d G^a_bc + G^p_bd G^a_pc - G^p_bc G^a_pd - W^p_cd G^a_bp

as Ric_bd = R^a_bad, so the full Riemann tensor is never stored.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import NUMERICS_CONFIG
from ..errors import DegenerateMetricError
from .connections import DConnection, canonical_dconnection, structure_functions
from .dmetric import DMetric, NConnection
from .grid import GridChart, hold_edges, interior_max

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurvatureBundle:
    """Ricci blocks and the h/v scalar curvatures."""

    ricci: np.ndarray
    scalar_h: np.ndarray
    scalar_v: np.ndarray
    connection_tag: str = 'canonical_d'

    @property
    def ricci_h(self) -> np.ndarray:
        return self.ricci[:2, :2]

    @property
    def ricci_v(self) -> np.ndarray:
        return self.ricci[2:, 2:]

    @property
    def ricci_hv(self) -> np.ndarray:
        """R_ia"""
        return self.ricci[:2, 2:]

    @property
    def ricci_vh(self) -> np.ndarray:
        """R_ai"""
        return self.ricci[2:, :2]

    @property
    def scalar(self) -> np.ndarray:
        """sR = R + S"""
        return self.scalar_h + self.scalar_v

    def mixed_norm(self, chart: GridChart, margin: int = NUMERICS_CONFIG['interior_margin']) -> float:
        return max(interior_max(self.ricci_hv, chart, margin),
                   interior_max(self.ricci_vh, chart, margin))


def ricci_tensor(m: DMetric, c: DConnection) -> np.ndarray:
    """Ric_bd = R^a_bad of connection ``c`` in the adapted frame of ``m``."""
    m.chart.require_same(c.chart, 'connection')
    gamma = c.gamma
    W = structure_functions(m)

    # sum_a e_a G^a_bd
    div = sum(m.frame_derivative(gamma[a], a) for a in range(4))
    trace = np.einsum('aba...->b...', gamma)                     # G^a_ba
    dtrace = np.stack([m.frame_derivative(trace, d) for d in range(4)], axis=1)   # [b, d]

    ric = (div
           - dtrace
           + np.einsum('pbd...,p...->bd...', gamma, np.einsum('apa...->p...', gamma))
           - np.einsum('pba...,apd...->bd...', gamma, gamma)
           - np.einsum('pad...,abp...->bd...', W, gamma))
    return ric


def _block_metrics(m: DMetric) -> Tuple[np.ndarray, np.ndarray]:
    G = np.zeros((4, 4) + m.chart.shape)
    G_inv = np.zeros((4, 4) + m.chart.shape)
    G[:2, :2], G[2:, 2:] = m.g, m.h
    G_inv[:2, :2], G_inv[2:, 2:] = m.g_inv, m.h_inv
    return G, G_inv


def curvature(m: DMetric, connection: Optional[DConnection] = None,
              margin: int = NUMERICS_CONFIG['interior_margin']) -> CurvatureBundle:
    """Curvature bundle of ``connection`` (canonical d-connection by default).

    Within ``margin`` nodes of a Dirichlet edge the mixed Ricci R^a_b of the first
    interior layer is kept and lowered with the local metric.
    """
    c = connection if connection is not None else canonical_dconnection(m)
    ric = ricci_tensor(m, c)
    if not np.all(np.isfinite(ric)):
        raise DegenerateMetricError(f"Ricci tensor of the {c.tag} connection is not finite")
    chart = m.chart
    mask = chart.interior_mask(margin)
    if not mask.all():
        G, G_inv = _block_metrics(m)
        mixed = hold_edges(np.einsum('ac...,cb...->ab...', G_inv, ric), chart, margin)
        ric = np.where(mask, ric, np.einsum('ac...,cb...->ab...', G, mixed))
    R = np.einsum('ij...,ij...->...', m.g_inv, ric[:2, :2])
    S = np.einsum('ab...,ab...->...', m.h_inv, ric[2:, 2:])
    return CurvatureBundle(ricci=ric, scalar_h=R, scalar_v=S, connection_tag=c.tag)


@dataclass
class EinsteinResidual:
    """Mixed-index residual E^a_b = R^a_b - 1/2 delta^a_b sR - Y^a_b with block norms."""

    field: np.ndarray
    h_norm: float
    v_norm: float
    mixed_norm: float
    source: Sequence[float] = field(default_factory=lambda: (0.0, 0.0, 0.0, 0.0))

    @property
    def max_norm(self) -> float:
        return max(self.h_norm, self.v_norm)

    def to_dict(self) -> Dict:
        return {
            'h_norm': self.h_norm,
            'v_norm': self.v_norm,
            'mixed_norm': self.mixed_norm,
            'max_norm': self.max_norm,
            'source': list(self.source),
        }


def einstein_residual(m: DMetric, source: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
                      bundle: Optional[CurvatureBundle] = None,
                      margin: int = NUMERICS_CONFIG['interior_margin']) -> EinsteinResidual:
    """Einstein residual against a diagonal source diag[Y1, Y2, Y3, Y4].

    Norms are taken over interior points, ``margin`` nodes away from Dirichlet edges.
    """
    bundle = bundle if bundle is not None else curvature(m)
    _, G_inv = _block_metrics(m)
    mixed = np.einsum('ac...,cb...->ab...', G_inv, bundle.ricci)
    E = mixed.copy()
    sR = bundle.scalar
    for a in range(4):
        E[a, a] = E[a, a] - 0.5 * sR - float(source[a])
    chart = m.chart
    res = EinsteinResidual(
        field=E,
        h_norm=interior_max(E[:2, :2], chart, margin),
        v_norm=interior_max(E[2:, 2:], chart, margin),
        mixed_norm=max(interior_max(E[:2, 2:], chart, margin),
                       interior_max(E[2:, :2], chart, margin)),
        source=tuple(float(s) for s in source),
    )
    logger.debug(f"Einstein residual h={res.h_norm:.3e} v={res.v_norm:.3e} "
                 f"mixed={res.mixed_norm:.3e}")
    return res


def lc_constraint_residual(m, h4: np.ndarray, w: np.ndarray,
                           n: np.ndarray) -> Dict[str, float]:
    """Zero-torsion constraint residuals for the ansatz N-connection N_i^3 = w_i, N_i^4 = n_i.

    Returns max-norms of w_i* - e_i ln|h4|, e_1 w_2 - e_2 w_1, n_i* and
    d_1 n_2 - d_2 n_1, where * is the derivative along t (axis 2). ``m`` is a
    DMetric or a bare GridChart.
    """
    chart = m.chart if isinstance(m, DMetric) else m
    h4 = chart.check_field(h4, 'h4')
    if np.any(h4 == 0):
        raise DegenerateMetricError("h4 vanishes on the chart; ln|h4| undefined")
    N = NConnection.from_wn(w, n, chart)
    log_h4 = np.log(np.abs(h4))
    w_star = chart.derivative(N.N[:, 0], 2)
    e_log = np.stack([N.frame_derivative(log_h4, i) for i in (0, 1)])
    e1_w2 = N.frame_derivative(N.N[1, 0], 0)
    e2_w1 = N.frame_derivative(N.N[0, 0], 1)
    n_star = chart.derivative(N.N[:, 1], 2)
    curl_n = chart.derivative(N.N[1, 1], 0) - chart.derivative(N.N[0, 1], 1)
    return {
        'w_star': float(np.max(np.abs(w_star - e_log))),
        'ew_sym': float(np.max(np.abs(e1_w2 - e2_w1))),
        'n_star': float(np.max(np.abs(n_star))),
        'dn_sym': float(np.max(np.abs(curl_n))),
    }
