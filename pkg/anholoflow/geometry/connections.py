"""
Canonical d-connection, Levi-Civita connection and distortion.

Connections live in the N-adapted frame e_alpha = (e_1, e_2, d_3, d_4):
``gamma[alpha, beta, c]`` is component alpha of D_{e_c} e_beta, so the usual
d-connection blocks are

    L^i_jk = gamma[i, j, k]        L^a_bk = gamma[a, b, k]
    C^i_jc = gamma[i, j, c]        C^a_bc = gamma[a, b, c]

with i, j, k in (0, 1) and a, b, c in (2, 3).
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateMetricError
from .dmetric import DMetric
from .grid import GridChart

logger = logging.getLogger(__name__)

H = slice(0, 2)
V = slice(2, 4)
CONNECTION_TAGS = ('canonical_d', 'levi_civita', 'sampled')


@dataclass(frozen=True)
class DConnection:
    """Linear connection coefficients on a chart."""

    gamma: np.ndarray
    chart: GridChart
    tag: str = 'canonical_d'

    def __post_init__(self):
        gamma = self.chart.check_field(self.gamma, 'connection')
        if gamma.shape[:3] != (4, 4, 4):
            raise DegenerateMetricError(f"Connection needs (4, 4, 4) components, got {gamma.shape[:3]}")
        if not np.all(np.isfinite(gamma)):
            raise DegenerateMetricError(f"{self.tag} connection has non-finite coefficients")
        object.__setattr__(self, 'gamma', gamma)

    @property
    def L_h(self) -> np.ndarray:
        return self.gamma[H, H, H]

    @property
    def L_v(self) -> np.ndarray:
        return self.gamma[V, V, H]

    @property
    def C_h(self) -> np.ndarray:
        return self.gamma[H, H, V]

    @property
    def C_v(self) -> np.ndarray:
        return self.gamma[V, V, V]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.gamma)))

    @classmethod
    def zero(cls, chart: GridChart, tag: str = 'sampled') -> 'DConnection':
        return cls(np.zeros((4, 4, 4) + chart.shape), chart, tag)


def structure_functions(m: DMetric) -> np.ndarray:
    """W[phi, c, d] with [e_c, e_d] = W^phi_cd e_phi.

    Only the vertical components are nonzero:
    [e_i, e_j] = (e_j N_i^a - e_i N_j^a) d_a and [e_i, d_b] = (d_b N_i^a) d_a.
    """
    N = m.N
    W = np.zeros((4, 4, 4) + m.chart.shape)
    if m.n_conn.is_zero:
        return W
    eN = np.stack([m.frame_derivative(N, k) for k in (0, 1)])   # eN[k, i, a] = e_k N_i^a
    dN = m.n_conn.partial_derivatives()                          # dN[b, i, a] = d_b N_i^a
    for i in (0, 1):
        for j in (0, 1):
            W[2:, i, j] = eN[j, i] - eN[i, j]
        for b in (0, 1):
            W[2:, i, 2 + b] = dN[b, i]
            W[2:, 2 + b, i] = -dN[b, i]
    return W


def frame_metric_derivatives(m: DMetric) -> np.ndarray:
    """dG[c, a, b] = e_c G_ab for the adapted 4x4 metric."""
    G = m.adapted_metric()
    return np.stack([m.frame_derivative(G, c) for c in range(4)])


def canonical_dconnection(m: DMetric) -> DConnection:
    """Canonical d-connection: metric compatible, no pure h- or v-torsion."""
    g, h = m.g, m.h
    g_inv, h_inv = m.g_inv, m.h_inv
    eg = np.stack([m.frame_derivative(g, c) for c in range(4)])   # eg[c, i, j] = e_c g_ij
    eh = np.stack([m.frame_derivative(h, c) for c in range(4)])   # eh[c, a, b] = e_c h_ab
    dN = m.n_conn.partial_derivatives()                            # dN[b, k, a] = d_b N_k^a

    gamma = np.zeros((4, 4, 4) + m.chart.shape)

    # L^i_jk = 1/2 g^ir (e_k g_jr + e_j g_kr - e_r g_jk)
    low = (np.einsum('kjr...->rjk...', eg[H])
           + np.einsum('jkr...->rjk...', eg[H])
           - eg[H])
    gamma[H, H, H] = 0.5 * np.einsum('ir...,rjk...->ijk...', g_inv, low)

    # C^i_jc = 1/2 g^ik d_c g_jk
    gamma[H, H, V] = 0.5 * np.einsum('ik...,cjk...->ijc...', g_inv, eg[V])

    # C^a_bc = 1/2 h^ad (d_c h_bd + d_b h_cd - d_d h_bc)
    low = (np.einsum('cbd...->dbc...', eh[V])
           + np.einsum('bcd...->dbc...', eh[V])
           - eh[V])
    gamma[V, V, V] = 0.5 * np.einsum('ad...,dbc...->abc...', h_inv, low)

    # L^a_bk = d_b N^a_k + 1/2 h^ac (e_k h_bc - h_dc d_b N^d_k - h_db d_c N^d_k)
    term = (np.einsum('kbc...->bck...', eh[H])
            - np.einsum('dc...,bkd...->bck...', h, dN)
            - np.einsum('db...,ckd...->bck...', h, dN))
    gamma[V, V, H] = (np.einsum('bka...->abk...', dN)
                      + 0.5 * np.einsum('ac...,bck...->abk...', h_inv, term))
    return DConnection(gamma, m.chart, 'canonical_d')


def levi_civita(m: DMetric) -> DConnection:
    """Levi-Civita connection of the full metric in the N-adapted frame (Koszul formula)."""
    G = m.adapted_metric()
    G_inv = np.zeros_like(G)
    G_inv[H, H] = m.g_inv
    G_inv[V, V] = m.h_inv
    dG = frame_metric_derivatives(m)   # dG[c, b, a] = e_c G_ba
    W = structure_functions(m)

    # 2 Gamma_{a b c} = e_c G_ba + e_b G_ca - e_a G_cb
    #                   + W^p_cb G_pa - W^p_ca G_pb - W^p_ba G_pc
    low = (np.einsum('cba...->abc...', dG)
           + np.einsum('bca...->abc...', dG)
           - np.einsum('acb...->abc...', dG)
           + np.einsum('pcb...,pa...->abc...', W, G)
           - np.einsum('pca...,pb...->abc...', W, G)
           - np.einsum('pba...,pc...->abc...', W, G))
    gamma = 0.5 * np.einsum('ae...,ebc...->abc...', G_inv, low)
    return DConnection(gamma, m.chart, 'levi_civita')


def distortion(m: DMetric) -> np.ndarray:
    """Distortion Z = canonical - Levi-Civita, componentwise in the adapted frame."""
    return canonical_dconnection(m).gamma - levi_civita(m).gamma


def metric_compat_residual(m: DMetric, c: DConnection) -> float:
    """Max-norm of D_c G_ab = e_c G_ab - Gamma^p_ac G_pb - Gamma^p_bc G_ap."""
    m.chart.require_same(c.chart, 'connection')
    G = m.adapted_metric()
    dG = frame_metric_derivatives(m)
    res = (np.einsum('cab...->abc...', dG)
           - np.einsum('pac...,pb...->abc...', c.gamma, G)
           - np.einsum('pbc...,ap...->abc...', c.gamma, G))
    # only the h- and v-blocks carry the metric
    value = max(float(np.max(np.abs(res[H, H]))), float(np.max(np.abs(res[V, V]))))
    logger.debug(f"metric compatibility residual ({c.tag}): {value:.3e}")
    return value


def torsion(m: DMetric, c: DConnection) -> np.ndarray:
    """T^a_bc = Gamma^a_cb - Gamma^a_bc - W^a_bc in the adapted frame."""
    m.chart.require_same(c.chart, 'connection')
    return (np.einsum('acb...->abc...', c.gamma) - c.gamma - structure_functions(m))


def torsion_report(m: DMetric, c: DConnection = None) -> dict:
    """Max-norms of the torsion blocks; pure hh-h and vv-v parts vanish for the canonical d-connection."""
    c = c if c is not None else canonical_dconnection(m)
    T = np.abs(torsion(m, c))
    return {
        'T_hhh': float(T[H, H, H].max()),
        'T_vvv': float(T[V, V, V].max()),
        'T_vhh': float(T[V, H, H].max()),     # anholonomy part Omega
        'T_hhv': float(max(T[H, H, V].max(), T[H, V, H].max())),
        'T_vvh': float(max(T[V, V, H].max(), T[V, H, V].max())),
        'max': float(T.max()),
    }


def sample_connection(chart: GridChart, blocks: dict, tag: str = 'sampled') -> DConnection:
    """Connection from analytic block fields, e.g. {'L_h': array(2, 2, 2, *shape)}."""
    gamma = np.zeros((4, 4, 4) + chart.shape)
    slots = {'L_h': (H, H, H), 'L_v': (V, V, H), 'C_h': (H, H, V), 'C_v': (V, V, V)}
    for name, value in blocks.items():
        gamma[slots[name]] = value
    return DConnection(gamma, chart, tag)