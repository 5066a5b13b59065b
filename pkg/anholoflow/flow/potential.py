"""
Backward pass for the potential f along a stored metric flow.

f solves df/dchi = -Lap f + |Df|^2 - R - S (+ n/tau in the tau variant),
which is backward parabolic in increasing chi. The density omega = exp(-f)
(times (4 pi tau)^(-n) in the tau variant) solves the conjugate equation

    d omega / d(-chi) = Lap omega - (R + S) omega,

well posed from chi = X down to 0. It is integrated with Crank-Nicolson on the
snapshots and f is recovered as -ln omega.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ..ansatz import field_from
from ..config import FLOW_CONFIG, FUNCTIONALS_CONFIG
from ..errors import ConfigError, FlowBreakdownError
from ..geometry import DConnection, DMetric, canonical_dconnection, curvature
from .state import FlowHistory

logger = logging.getLogger(__name__)


def frame_derivative_matrices(m: DMetric) -> List[sp.csr_matrix]:
    """Sparse e_1, e_2, d_3, d_4 on C-order flattened fields."""
    chart = m.chart
    D = [chart.derivative_matrix(k) for k in range(4)]
    E = []
    for i in (0, 1):
        Ei = D[i]
        for a in (0, 1):
            Ei = Ei - sp.diags(m.N[i, a].ravel()) @ D[2 + a]
        E.append(Ei.tocsr())
    return E + D[2:]


def laplace_beltrami_matrix(m: DMetric, c: Optional[DConnection] = None) -> sp.csr_matrix:
    """Sparse Lap = g^ij (e_i e_j - G^k_ji e_k) + h^ab (d_a d_b - G^k_ba e_k)."""
    c = c if c is not None else canonical_dconnection(m)
    E = frame_derivative_matrices(m)
    g_inv, h_inv = m.g_inv, m.h_inv
    # first-order coefficients sum_ij g^ij G^k_ji + sum_ab h^ab G^k_ba
    first = (np.einsum('ij...,kji...->k...', g_inv, c.gamma[:, :2, :2])
             + np.einsum('ab...,kba...->k...', h_inv, c.gamma[:, 2:, 2:]))
    L = sp.csr_matrix((m.chart.size, m.chart.size))
    for i in (0, 1):
        for j in (0, 1):
            L = L + sp.diags(g_inv[i, j].ravel()) @ (E[i] @ E[j])
            L = L + sp.diags(h_inv[i, j].ravel()) @ (E[2 + i] @ E[2 + j])
    for k in range(4):
        L = L - sp.diags(first[k].ravel()) @ E[k]
    return L.tocsr()


def conjugate_operator(m: DMetric) -> sp.csr_matrix:
    """Lap - (R + S) for the canonical d-connection of ``m``."""
    c = canonical_dconnection(m)
    scalar = curvature(m, c).scalar
    return (laplace_beltrami_matrix(m, c) - sp.diags(scalar.ravel())).tocsr()


@dataclass
class PotentialFamily:
    """f and tau on the snapshot times, with the mass diagnostics."""

    chi: np.ndarray
    f: List[np.ndarray] = field(repr=False)
    tau: np.ndarray
    with_tau_term: bool
    mass: np.ndarray          # int exp(-f) dV
    mu_mass: np.ndarray       # int (4 pi tau)^-n exp(-f) dV

    def mass_drift(self) -> float:
        """Relative drift of the conserved mass (int mu dV in the tau variant)."""
        conserved = self.mu_mass if self.with_tau_term else self.mass
        return float(np.max(np.abs(conserved / conserved[-1] - 1.0)))

    def rows(self) -> List[Dict]:
        return [{'chi': c, 'tau_hat': t, 'mass': ms, 'mu_mass': mu}
                for c, t, ms, mu in zip(self.chi, self.tau, self.mass, self.mu_mass)]


def f_evolution(history: FlowHistory, omega_final=FLOW_CONFIG['omega_final'],
                with_tau_term: bool = FLOW_CONFIG['with_tau_term'],
                n: int = FUNCTIONALS_CONFIG['n']) -> PotentialFamily:
    """Potential f on every snapshot of ``history``.

    ``omega_final`` (expression, number or array) is the density at the last
    snapshot before normalization to unit mass.
    """
    if len(history) < 2:
        raise ConfigError(f"the backward pass needs at least 2 snapshots, got {len(history)}")
    snaps = history.snapshots
    last = snaps[-1].metric
    chart = last.chart
    omega = field_from(omega_final, chart).ravel()
    vol = [s.metric.volume_form().ravel() for s in snaps]
    total = float(vol[-1] @ omega)
    if not total > 0:
        raise FlowBreakdownError(f"final density has mass {total:g}; it must be positive")
    omega = omega / total

    ops = [conjugate_operator(s.metric) for s in snaps]
    eye = sp.identity(chart.size, format='csr')
    omegas = [omega]
    for k in range(len(snaps) - 2, -1, -1):
        dchi = snaps[k + 1].chi - snaps[k].chi
        lhs = (eye - 0.5 * dchi * ops[k]).tocsc()
        rhs = omega + 0.5 * dchi * (ops[k + 1] @ omega)
        omega = spsolve(lhs, rhs)
        if not np.all(np.isfinite(omega)) or np.min(omega) <= 0:
            raise FlowBreakdownError(
                f"density is not positive at chi={snaps[k].chi:g} (min {np.min(omega):.3e}); "
                f"f is undefined", details={'chi': snaps[k].chi})
        omegas.append(omega)
    omegas.reverse()

    taus = np.array([s.tau_hat for s in snaps])
    fs, mass, mu_mass = [], [], []
    for om, v, tau in zip(omegas, vol, taus):
        f = -np.log(om)
        if with_tau_term:
            f = f - n * np.log(4.0 * np.pi * tau)
        fs.append(f.reshape(chart.shape))
        mass.append(float(v @ np.exp(-f)))
        mu_mass.append(float(v @ ((4.0 * np.pi * tau) ** (-n) * np.exp(-f))))
    family = PotentialFamily(chi=history.chis, f=fs, tau=taus, with_tau_term=with_tau_term,
                             mass=np.array(mass), mu_mass=np.array(mu_mass))
    logger.info(f"backward pass over {len(snaps)} snapshots; "
                f"mass drift {family.mass_drift():.3e}")
    return family
