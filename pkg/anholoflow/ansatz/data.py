"""
Generating data of the anisotropic ansatz and the assembled metric family.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import ANSATZ_CONFIG, NUMERICS_CONFIG
from ..errors import ConfigError, DegenerateMetricError, GeneratingFunctionError
from ..expressions import compile_expression
from ..geometry import DMetric, GridChart, NConnection

logger = logging.getLogger(__name__)


def field_from(value, chart: GridChart, extra: Optional[Dict[str, float]] = None) -> np.ndarray:
    """Evaluate an expression, number or array on the chart."""
    if isinstance(value, np.ndarray):
        return np.broadcast_to(value, chart.shape).astype(float)
    extra = extra or {}
    expr = compile_expression(value, allowed=chart.names + tuple(extra))
    coords = chart.coordinate_dict()
    coords.update(extra)
    return expr.evaluate(**coords) * np.ones(chart.shape)


def phi_star(phi: np.ndarray, chart: GridChart) -> np.ndarray:
    """d phi / dt by central differences along the t axis."""
    return chart.derivative(phi, 2)


def check_phi_star(phi: np.ndarray, chart: GridChart,
                   eps_phi: float = NUMERICS_CONFIG['eps_phi']) -> np.ndarray:
    ps = phi_star(phi, chart)
    low = float(np.min(np.abs(ps)))
    if low < eps_phi:
        raise GeneratingFunctionError(
            f"|d phi/dt| reaches {low:.3e}, below the bound {eps_phi:g}",
            details={'min_abs_phi_star': low})
    return ps


@dataclass
class GeneratingData:
    """Generating function samples phi(., chi_m) and the free integration data."""

    chart: GridChart
    phi: np.ndarray                       # (M,) + chart.shape
    lam: float
    h4_0: np.ndarray
    n1: np.ndarray                        # (2,) + chart.shape
    n2: np.ndarray
    psi_boundary: np.ndarray
    chi: Tuple[float, ...] = (0.0,)
    signs: Tuple[float, float] = (1.0, 1.0)
    eps_phi: float = NUMERICS_CONFIG['eps_phi']

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam == 0.0:
            raise ConfigError(f"lambda must be a nonzero finite number, got {self.lam}")
        if self.chart.axes[2].periodic:
            raise ConfigError("The anisotropic coordinate t must be a Dirichlet axis")
        phi = np.asarray(self.phi, dtype=float)
        if phi.shape == self.chart.shape:
            phi = phi[None]
        if phi.shape[1:] != self.chart.shape or phi.shape[0] != len(self.chi):
            raise ConfigError(f"phi samples have shape {phi.shape}, expected "
                              f"({len(self.chi)},) + {self.chart.shape}")
        if not np.all(np.isfinite(phi)):
            raise ConfigError("phi is not finite on the chart")
        for s in self.signs:
            if s not in (1.0, -1.0):
                raise ConfigError(f"Sign flags must be +1 or -1, got {self.signs}")
        self.phi = phi
        for m in range(phi.shape[0]):
            check_phi_star(phi[m], self.chart, self.eps_phi)

    @classmethod
    def from_config(cls, chart: GridChart, block: Optional[Dict] = None) -> 'GeneratingData':
        """Build from an ``ansatz`` config block (expressions for every free function)."""
        cfg = {**ANSATZ_CONFIG, **(block or {})}
        chi = tuple(float(c) for c in cfg['chi'])
        phi = np.stack([field_from(cfg['phi0'], chart, {'chi': c}) for c in chi])
        return cls(
            chart=chart,
            phi=phi,
            lam=float(cfg['lambda']),
            h4_0=field_from(cfg['h4_0'], chart),
            n1=np.stack([field_from(e, chart) for e in cfg['n1']]),
            n2=np.stack([field_from(e, chart) for e in cfg['n2']]),
            psi_boundary=field_from(cfg['psi_boundary'], chart),
            chi=chi,
            signs=tuple(float(s) for s in cfg['signs']),
        )

    def with_phi(self, phi: np.ndarray) -> 'GeneratingData':
        return GeneratingData(self.chart, phi, self.lam, self.h4_0, self.n1, self.n2,
                              self.psi_boundary, self.chi, self.signs, self.eps_phi)


@dataclass
class AnsatzMetric:
    """psi, h3, h4, w_i, n_i of the anisotropic ansatz on one chart."""

    psi: np.ndarray
    h3: np.ndarray
    h4: np.ndarray
    w: np.ndarray
    n: np.ndarray
    chart: GridChart
    signs: Tuple[float, float] = (1.0, 1.0)
    chi: float = 0.0
    rates: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ('psi', 'h3', 'h4'):
            setattr(self, name, self.chart.check_field(getattr(self, name), name))
        for name in ('w', 'n'):
            arr = self.chart.check_field(getattr(self, name), name)
            if arr.shape[0] != 2:
                raise DegenerateMetricError(f"{name} needs 2 components")
            setattr(self, name, arr)
        if np.any(self.h3 * self.h4 == 0):
            raise DegenerateMetricError("h3*h4 vanishes on the chart")

    @property
    def signature(self) -> str:
        return 'lorentz_v' if min(self.signs) < 0 else 'riemannian'

    def to_dmetric(self) -> DMetric:
        e_psi = np.exp(self.psi)
        return DMetric.diagonal(self.chart, e_psi, e_psi,
                                self.signs[0] * self.h3, self.signs[1] * self.h4,
                                N=NConnection.from_wn(self.w, self.n, self.chart).N,
                                signature=self.signature)

    def to_fields(self) -> Dict[str, np.ndarray]:
        return {'psi': self.psi, 'h3': self.h3, 'h4': self.h4,
                'w1': self.w[0], 'w2': self.w[1], 'n1': self.n[0], 'n2': self.n[1]}

    @classmethod
    def from_fields(cls, fields: Dict[str, np.ndarray], chart: GridChart,
                    signs: Sequence[float] = (1.0, 1.0), chi: float = 0.0) -> 'AnsatzMetric':
        try:
            return cls(psi=fields['psi'], h3=fields['h3'], h4=fields['h4'],
                       w=np.stack([fields['w1'], fields['w2']]),
                       n=np.stack([fields['n1'], fields['n2']]),
                       chart=chart, signs=tuple(signs), chi=chi)
        except KeyError as e:
            raise ConfigError(f"Ansatz field {e} missing") from e
