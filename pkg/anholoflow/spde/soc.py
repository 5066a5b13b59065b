"""
Self-organized-criticality statistics and the dchi self-convergence study.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from ..ensemble import path_rng
from .noise import draw_increments, refine_increments
from .solver import RNG_TAG, SPDESetup, SPDEState, TrajectoryRecord, step

logger = logging.getLogger(__name__)

TREND_LEVEL = 0.05
ABSORPTION_FRACTION = 0.1


def soc_statistics(records: Sequence[TrajectoryRecord], burn_in: int = 0) -> Dict:
    """Ensemble-mean supercritical measure and the absorption verdict.

    Absorbed means a significant decreasing Spearman trend of the mean measure
    between ``burn_in`` and its first zero, and a final value below a tenth of
    the initial one. A measure that is zero throughout counts as absorbed.
    """
    ok = [r for r in records if not r.failed]
    if not ok:
        logger.warning("SOC statistics: no successful paths, verdict inconclusive")
        return {'absorption_flag': None, 'inconclusive': True, 'paths': 0}
    chi = np.asarray(ok[0].chi)
    m_bar = np.mean([r.m for r in ok], axis=0)
    out = {'chi': chi.tolist(), 'm_bar': m_bar.tolist(), 'paths': len(ok),
           'trend_rho': None, 'trend_p': None, 'tail_slope': None, 'inconclusive': False}

    if not np.any(m_bar > 0):
        out['absorption_flag'] = True
        return out

    zeros = np.nonzero(m_bar[burn_in:] == 0)[0]
    end = burn_in + int(zeros[0]) + 1 if zeros.size else len(m_bar)
    window_chi, window_m = chi[burn_in:end], m_bar[burn_in:end]
    if window_m.size < 3:
        logger.warning(f"SOC statistics: trend window has {window_m.size} points, inconclusive")
        out.update(absorption_flag=None, inconclusive=True)
        return out

    rho, p = stats.spearmanr(window_chi, window_m)
    rho = float(rho) if np.isfinite(rho) else 0.0
    p = float(p) if np.isfinite(p) else 1.0
    tail = max(3, window_m.size // 3)
    slope = stats.linregress(window_chi[-tail:], window_m[-tail:]).slope
    decreasing = rho < 0 and p < TREND_LEVEL
    small = m_bar[-1] < ABSORPTION_FRACTION * m_bar[0] if m_bar[0] > 0 else m_bar[-1] == 0
    out.update(trend_rho=rho, trend_p=p, tail_slope=float(slope),
               absorption_flag=bool(decreasing and small))
    return out


def self_convergence(setup: SPDESetup, levels: int = 3, path_index: int = 0,
                     alt_newton_tol: Optional[float] = 1e-9) -> Dict:
    """Run a dchi ladder on one Brownian path refined by Brownian bridges.

    Differences between successive levels are measured in the mass-weighted
    L2 norm at the coarse times; orders are log2 of successive difference ratios.
    """
    rng = path_rng(setup.seed, RNG_TAG, path_index)
    increments = draw_increments(rng, setup.noise.K, setup.dchi, setup.steps)
    bridge_rng = path_rng(setup.seed, RNG_TAG + '.bridge', path_index)
    finals: List[Dict] = []
    trajectories = []
    dchi, steps = setup.dchi, setup.steps
    level_setup = setup
    for level in range(levels):
        if level > 0:
            increments = refine_increments(increments, dchi, bridge_rng)
            dchi, steps = dchi / 2.0, steps * 2
            level_setup = setup.with_step(dchi, steps)
        record = _run_keep_fields(level_setup, path_index, increments)
        finals.append(record)
        stride = 2 ** level
        trajectories.append(record['fields'][::stride])

    mass = setup.domain.mass
    diffs = []
    for a, b in zip(trajectories[:-1], trajectories[1:]):
        d = np.sqrt(np.sum(mass * (a - b) ** 2, axis=1))
        diffs.append(float(d.max()))
    orders = [float(np.log2(d0 / d1)) if d1 > 0 and d0 > 0 else None
              for d0, d1 in zip(diffs[:-1], diffs[1:])]
    out = {'dchi': [setup.dchi / 2 ** k for k in range(levels)], 'differences': diffs,
           'orders': orders}
    if alt_newton_tol is not None:
        alt = setup.with_step(dchi, steps)
        alt.newton_tol = alt_newton_tol
        alt_fields = _run_keep_fields(alt, path_index, increments)['fields']
        gap = np.sqrt(np.sum(mass * (alt_fields - finals[-1]['fields']) ** 2, axis=1))
        out['inner_solver_gap'] = float(gap.max())
    logger.info(f"self-convergence: differences {diffs}, orders {orders}")
    return out


def _run_keep_fields(setup: SPDESetup, index: int, increments: np.ndarray) -> Dict:
    state = SPDEState(U=setup.U0.copy(), path=index, eps=setup.eps)
    fields = [state.U]
    for n in range(setup.steps):
        state = step(state, setup.dchi, setup.graph, setup.noise, setup.domain, setup.eps,
                     dbeta=increments[n], tol=setup.newton_tol,
                     max_iter=setup.newton_max_iter, max_halvings=setup.newton_max_halvings)
        fields.append(state.U)
    return {'fields': np.array(fields)}
