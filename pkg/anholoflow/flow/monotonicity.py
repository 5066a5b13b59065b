"""
Monotonicity of F and W along a flow with its backward-computed potential.

At every interior snapshot the centered difference of F is compared with
2 int (|Ric_h + Hess_h f|^2 + |Ric_v + Hess_v f|^2) exp(-f) dV, and the
fluctuation sigma with tau^3 dW/dchi.
"""

import logging
from typing import Dict, List

import numpy as np

from ..config import FUNCTIONALS_CONFIG, NUMERICS_CONFIG
from ..errors import ConfigError
from ..functionals import (F_functional, W_functional, monotonicity_integrand,
                           sigma_functional)
from ..geometry import canonical_dconnection, curvature
from .potential import PotentialFamily
from .state import FlowHistory

logger = logging.getLogger(__name__)


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def functional_series(history: FlowHistory, family: PotentialFamily,
                      n: int = FUNCTIONALS_CONFIG['n']) -> List[Dict]:
    """F, W, the F-integrand and sigma on every snapshot.

    F uses f = -ln omega and W uses f = -ln omega - n ln(4 pi tau), both from the
    same density.
    """
    rows = []
    for snap, f, tau in zip(history.snapshots, family.f, family.tau):
        shift = n * np.log(4.0 * np.pi * tau)
        f_plain, f_tau = (f + shift, f) if family.with_tau_term else (f, f - shift)
        m = snap.metric
        c = canonical_dconnection(m)
        b = curvature(m, c)
        rows.append({'chi': snap.chi, 'tau_hat': float(tau),
                     'F': F_functional(m, f_plain, c, b),
                     'W': W_functional(m, f_tau, tau, n, connection=c, bundle=b),
                     'F_integrand': monotonicity_integrand(m, f_plain, c, b),
                     'sigma': sigma_functional(m, f_tau, tau, n, connection=c, bundle=b)})
    return rows


def monotonicity_report(history: FlowHistory, family: PotentialFamily,
                        tol_mono: float = NUMERICS_CONFIG['tol_mono']) -> Dict:
    """Finite-difference slopes of F and W against their integrand formulas."""
    if len(history) < 3:
        raise ConfigError(f"monotonicity needs at least 3 snapshots, got {len(history)}")
    rows = functional_series(history, family)
    chi = np.array([r['chi'] for r in rows])
    F = np.array([r['F'] for r in rows])
    W = np.array([r['W'] for r in rows])
    for k, row in enumerate(rows):
        if 0 < k < len(rows) - 1:
            span = chi[k + 1] - chi[k - 1]
            row['dF_fd'] = float((F[k + 1] - F[k - 1]) / span)
            row['dW_fd'] = float((W[k + 1] - W[k - 1]) / span)
            row['F_mismatch'] = _relative(row['dF_fd'], row['F_integrand'])
            row['tau3_dW'] = row['tau_hat'] ** 3 * row['dW_fd']
            row['sigma_mismatch'] = _relative(row['sigma'], row['tau3_dW'])
        else:
            row.update(dF_fd=None, dW_fd=None, F_mismatch=None, tau3_dW=None,
                       sigma_mismatch=None)
    slopes = [r['dF_fd'] for r in rows if r['dF_fd'] is not None]
    monotone = bool(min(slopes) >= -tol_mono)
    if not monotone:
        logger.warning(f"F decreases along the flow (slope {min(slopes):.3e})")
    mid = rows[len(rows) // 2]
    report = {'rows': rows, 'monotone': monotone, 'min_slope': float(min(slopes)),
              'mid_F_mismatch': mid['F_mismatch'], 'mid_sigma_mismatch': mid['sigma_mismatch'],
              'mass_drift': family.mass_drift(),
              'integrand_min': float(min(r['F_integrand'] for r in rows))}
    logger.info(f"monotonicity: monotone={monotone}, mid-trajectory mismatch "
                f"{mid['F_mismatch']}")
    return report
