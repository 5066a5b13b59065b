"""
Flow of the ansatz v-block in chi:

    d h3 / d chi = -h3 phi* / h4,    d h4 / d chi = -h4 phi* / h3,

driven by a chi-dependent generating function; psi is kept, w and n are
refreshed from the current phi and (h3, h4) after every step.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config import NUMERICS_CONFIG
from ..ensemble import mean_stderr, run_paths
from ..errors import FlowBreakdownError
from ..geometry import GridChart, curvature
from ..ansatz import (AnsatzMetric, GeneratingData, build_n, build_w, check_phi_star, generate,
                      sample_random_phi)
from .state import rk4

logger = logging.getLogger(__name__)


def ansatz_rates(h3: np.ndarray, h4: np.ndarray,
                 ps: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return -h3 * ps / h4, -h4 * ps / h3


def phi_at(data: GeneratingData, chi: float) -> np.ndarray:
    """phi at ``chi``, linear between the stored samples and constant outside."""
    samples = np.asarray(data.chi)
    if len(samples) == 1 or chi <= samples[0]:
        return data.phi[0]
    if chi >= samples[-1]:
        return data.phi[-1]
    k = int(np.searchsorted(samples, chi, side='right')) - 1
    s = (chi - samples[k]) / (samples[k + 1] - samples[k])
    return (1.0 - s) * data.phi[k] + s * data.phi[k + 1]


def flow_step_ansatz(am: AnsatzMetric, phi: np.ndarray, dchi: float,
                     phi_next: Optional[np.ndarray] = None,
                     n_data: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                     eps_phi: float = NUMERICS_CONFIG['eps_phi']) -> AnsatzMetric:
    """One RK4 step of (h3, h4); phi* is interpolated linearly inside the step.

    ``n_data`` = (1n, 2n) refreshes n from the new v-block; without it n is kept.
    """
    chart = am.chart
    phi_next = phi if phi_next is None else phi_next
    ps0 = check_phi_star(phi, chart, eps_phi)
    ps1 = check_phi_star(phi_next, chart, eps_phi)
    sign3, sign4 = np.sign(am.h3), np.sign(am.h4)

    def rhs(s, y):
        return ansatz_rates(y[0], y[1], ps0 + s * (ps1 - ps0))

    def check(y):
        if np.any(np.sign(y[0]) != sign3) or np.any(np.sign(y[1]) != sign4):
            raise FlowBreakdownError(
                f"h3 or h4 changes sign within the step from chi={am.chi:g} (dchi={dchi:g})",
                details={'chi': am.chi, 'dchi': dchi})

    h3, h4 = rk4(rhs, (am.h3, am.h4), dchi, check)
    w = build_w(phi_next, chart, eps_phi)
    n = am.n if n_data is None else build_n(h3, h4, n_data[0], n_data[1], chart)
    return AnsatzMetric(psi=am.psi, h3=h3, h4=h4, w=w, n=n, chart=chart, signs=am.signs,
                        chi=am.chi + dchi, rates=ansatz_rates(h3, h4, ps1))


@dataclass
class AnsatzFlowResult:
    """Per-step rows and the snapshots kept at the stride."""

    rows: List[Dict] = field(default_factory=list)
    snapshots: List[AnsatzMetric] = field(default_factory=list)

    @property
    def final(self) -> AnsatzMetric:
        return self.snapshots[-1]

    def trajectory(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows])


def chart_mean(f: np.ndarray, chart: GridChart) -> float:
    w = chart.weights()
    return float(np.sum(f * w) / np.sum(w))


def _row(am: AnsatzMetric, check_mixed: bool) -> Dict:
    row = {'chi': am.chi,
           'h3_mean': chart_mean(am.h3, am.chart),
           'h4_mean': chart_mean(am.h4, am.chart),
           'h3_min_abs': float(np.min(np.abs(am.h3))),
           'h4_min_abs': float(np.min(np.abs(am.h4)))}
    if check_mixed:
        row['mixed_ricci'] = curvature(am.to_dmetric()).mixed_norm(am.chart)
    return row


def ansatz_flow(data: GeneratingData, dchi: float, steps: int, index: int = 0,
                stride: int = 1, check_mixed: bool = True,
                tol_mixed: float = NUMERICS_CONFIG['tol_mixed']) -> AnsatzFlowResult:
    """Start from the closed-form metric at the first phi sample and flow ``steps`` steps."""
    am = generate(data, index=0)
    chi0 = data.chi[0]
    result = AnsatzFlowResult()
    result.rows.append(_row(am, check_mixed))
    result.snapshots.append(am)
    for k in range(steps):
        chi = chi0 + k * dchi
        am = flow_step_ansatz(am, phi_at(data, chi), dchi, phi_at(data, chi + dchi),
                              n_data=(data.n1, data.n2), eps_phi=data.eps_phi)
        row = _row(am, check_mixed)
        if check_mixed and row['mixed_ricci'] > tol_mixed:
            logger.warning(f"path {index}: mixed Ricci {row['mixed_ricci']:.3e} above "
                           f"{tol_mixed:g} at chi={am.chi:g}")
        result.rows.append(row)
        if (k + 1) % stride == 0 or k + 1 == steps:
            result.snapshots.append(am)
    logger.info(f"ansatz flow path {index}: {steps} steps to chi={am.chi:g}")
    return result


def _ansatz_flow_worker(index: int, data: GeneratingData, noise: Dict, seed: int,
                        dchi: float, steps: int) -> Dict[str, np.ndarray]:
    chart = data.chart
    phi = sample_random_phi(data.phi, noise, seed, data.chi, chart, path_index=index,
                            admissible=lambda p: check_phi_star(p, chart, data.eps_phi))
    res = ansatz_flow(data.with_phi(phi), dchi, steps, index=index, check_mixed=False)
    return {'h3_mean': res.trajectory('h3_mean'), 'h4_mean': res.trajectory('h4_mean'),
            'chi': res.trajectory('chi')}


def stochastic_ansatz_flows(data: GeneratingData, noise: Dict, seed: int, paths: int,
                            dchi: float, steps: int, backend: str = 'serial',
                            num_workers: Optional[int] = None) -> Dict:
    """Ensemble of ansatz flows over random phi paths: mean and standard error of h3, h4."""
    results = run_paths(_ansatz_flow_worker, paths,
                        {'data': data, 'noise': noise, 'seed': seed, 'dchi': dchi,
                         'steps': steps}, backend, num_workers)
    ok = [r.value for r in results if not r.failed]
    out = {'paths': paths, 'failed': paths - len(ok),
           'errors': [r.error for r in results if r.failed]}
    if ok:
        out['chi'] = ok[0]['chi']
        for key in ('h3_mean', 'h4_mean'):
            stats = mean_stderr([v[key] for v in ok])
            out[key] = stats['mean']
            out[key + '_stderr'] = stats['stderr']
    return out
