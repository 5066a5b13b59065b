"""
N-adapted Ricci flow with a frozen N-connection:

    d g_ij / d chi = -2 (R_ij - lambda g_ij),   d h_ab / d chi = -2 (R_ab - lambda h_ab),

the lambda terms switched on by ``lambda_term``. Ricci blocks are those of the
canonical d-connection, symmetrized.
"""

import logging
from typing import Tuple

import numpy as np

from ..config import FLOW_CONFIG, NUMERICS_CONFIG
from ..errors import DegenerateMetricError, FlowBreakdownError
from ..geometry import DMetric, curvature
from .state import FlowHistory, FlowState, rk4

logger = logging.getLogger(__name__)


def _sym(block: np.ndarray) -> np.ndarray:
    return 0.5 * (block + np.swapaxes(block, 0, 1))


def ricci_rates(m: DMetric, lam: float = 0.0,
                lambda_term: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Block rates -2 sym Ric (+ 2 lambda g). Dirichlet edge layers scale with
    the mixed Ricci of their first interior neighbour."""
    b = curvature(m)
    dg = -2.0 * _sym(b.ricci_h)
    dh = -2.0 * _sym(b.ricci_v)
    if lambda_term:
        dg = dg + 2.0 * lam * m.g
        dh = dh + 2.0 * lam * m.h
    return dg, dh


def flow_step_general(fs: FlowState, dchi: float, lam: float = FLOW_CONFIG['lambda'],
                      lambda_term: bool = FLOW_CONFIG['lambda_term'],
                      tol_mixed: float = NUMERICS_CONFIG['tol_mixed']) -> FlowState:
    """One RK4 step of both blocks; N is kept fixed and tau_hat decreases by dchi."""
    m0 = fs.metric
    mixed = curvature(m0).mixed_norm(m0.chart)
    if mixed > tol_mixed:
        logger.warning(f"mixed Ricci {mixed:.3e} above {tol_mixed:g} at chi={fs.chi:g}; "
                       f"the block flow ignores it")

    def metric(y) -> DMetric:
        try:
            return m0.with_blocks(y[0], y[1])
        except DegenerateMetricError as e:
            raise FlowBreakdownError(f"metric degenerates in the step from chi={fs.chi:g}: {e}",
                                     details={'chi': fs.chi, 'dchi': dchi}) from e

    def rhs(s, y):
        return ricci_rates(metric(y), lam, lambda_term)

    g, h = rk4(rhs, (m0.g, m0.h), dchi, check=metric)
    tau = fs.tau_hat - dchi
    if not tau > 0:
        raise FlowBreakdownError(f"tau_hat reaches {tau:g} at chi={fs.chi + dchi:g}")
    return FlowState(metric=metric((g, h)), chi=fs.chi + dchi, tau_hat=tau,
                     mixed_residual=mixed)


def run_general_flow(m: DMetric, dchi: float = FLOW_CONFIG['dchi'],
                     steps: int = FLOW_CONFIG['steps'], lam: float = FLOW_CONFIG['lambda'],
                     lambda_term: bool = FLOW_CONFIG['lambda_term'],
                     tau0: float = FLOW_CONFIG['tau0'],
                     stride: int = FLOW_CONFIG['snapshot_stride'],
                     chi0: float = 0.0) -> FlowHistory:
    """Forward run storing a snapshot every ``stride`` steps (and the last one)."""
    state = FlowState(metric=m, chi=chi0, tau_hat=tau0)
    history = FlowHistory()
    history.append(state)
    for k in range(steps):
        state = flow_step_general(state, dchi, lam, lambda_term)
        history.rows.append({'chi': state.chi, 'tau_hat': state.tau_hat,
                             'mixed_ricci': state.mixed_residual})
        if (k + 1) % stride == 0 or k + 1 == steps:
            history.append(state)
        logger.debug(f"flow step {k + 1}/{steps}: chi={state.chi:g}")
    logger.info(f"general flow: {steps} steps to chi={state.chi:g}, "
                f"{len(history)} snapshots")
    return history
