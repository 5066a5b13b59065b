"""
Flow state, the append-only snapshot history and the breather scale record.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import FLOW_CONFIG
from ..errors import ConfigError
from ..geometry import DMetric, block_det

logger = logging.getLogger(__name__)


@dataclass
class FlowState:
    """Metric, potential and backward time at one value of chi."""

    metric: DMetric
    chi: float = 0.0
    tau_hat: float = FLOW_CONFIG['tau0']
    f_hat: Optional[np.ndarray] = field(default=None, repr=False)
    mixed_residual: Optional[float] = None

    def __post_init__(self):
        if not self.tau_hat > 0:
            raise ConfigError(f"tau_hat must be positive, got {self.tau_hat}")


@dataclass(frozen=True)
class Snapshot:
    chi: float
    metric: DMetric
    tau_hat: float


@dataclass
class FlowHistory:
    """Snapshots stored along a forward run, read by the backward pass."""

    snapshots: List[Snapshot] = field(default_factory=list)
    rows: List[Dict] = field(default_factory=list)

    def append(self, state: FlowState) -> None:
        if self.snapshots and state.chi <= self.snapshots[-1].chi:
            raise ConfigError(f"snapshot at chi={state.chi:g} is not after "
                              f"chi={self.snapshots[-1].chi:g}")
        self.snapshots.append(Snapshot(state.chi, state.metric, state.tau_hat))

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def chis(self) -> np.ndarray:
        return np.array([s.chi for s in self.snapshots])

    @property
    def metrics(self) -> List[DMetric]:
        return [s.metric for s in self.snapshots]

    @property
    def taus(self) -> np.ndarray:
        return np.array([s.tau_hat for s in self.snapshots])

    def breather_records(self, tol: float = FLOW_CONFIG['breather_tol']) -> List[Dict]:
        return breather_records(self.snapshots, tol)


def rk4(rhs: Callable[[float, Tuple[np.ndarray, ...]], Tuple[np.ndarray, ...]],
        y: Tuple[np.ndarray, ...], dchi: float,
        check: Optional[Callable[[Tuple[np.ndarray, ...]], None]] = None) -> Tuple[np.ndarray, ...]:
    """Classical RK4 over one step; ``rhs(s, y)`` takes the step fraction s in [0, 1].

    ``check`` is called on every stage state and on the result.
    """
    def shift(base, k, c):
        return tuple(b + c * dchi * kk for b, kk in zip(base, k))

    k1 = rhs(0.0, y)
    y2 = shift(y, k1, 0.5)
    if check:
        check(y2)
    k2 = rhs(0.5, y2)
    y3 = shift(y, k2, 0.5)
    if check:
        check(y3)
    k3 = rhs(0.5, y3)
    y4 = shift(y, k3, 1.0)
    if check:
        check(y4)
    k4 = rhs(1.0, y4)
    out = tuple(b + dchi / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
                for b, a1, a2, a3, a4 in zip(y, k1, k2, k3, k4))
    if check:
        check(out)
    return out


def block_volume(m: DMetric) -> Tuple[float, float]:
    """Integrals of sqrt|det g| and sqrt|det h| over the chart."""
    w = m.chart.weights()
    return (float(np.sum(np.sqrt(np.abs(block_det(m.g))) * w)),
            float(np.sum(np.sqrt(np.abs(block_det(m.h))) * w)))


def _label(alpha: float, tol: float) -> str:
    if abs(alpha - 1.0) <= tol:
        return 'steady'
    return 'shrinking' if alpha < 1.0 else 'expanding'


def breather_records(snapshots: Sequence[Snapshot],
                     tol: float = FLOW_CONFIG['breather_tol']) -> List[Dict]:
    """Block scale factors between consecutive snapshots.

    A 2-block scaled by alpha has its volume scaled by alpha, so alpha is the
    ratio of the block volumes.
    """
    records = []
    for a, b in zip(snapshots[:-1], snapshots[1:]):
        vh0, vv0 = block_volume(a.metric)
        vh1, vv1 = block_volume(b.metric)
        alpha_h, alpha_v = vh1 / vh0, vv1 / vv0
        records.append({'chi0': a.chi, 'chi1': b.chi, 'alpha_h': alpha_h, 'alpha_v': alpha_v,
                        'label_h': _label(alpha_h, tol), 'label_v': _label(alpha_v, tol)})
    return records
