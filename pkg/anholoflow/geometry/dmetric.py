"""
N-connections, d-metrics and N-elongated derivatives.

Component fields carry their tensor indices in front of the grid dimensions:
``g[i, j]`` and ``h[a, b]`` have shape ``(2, 2) + chart.shape`` and the
N-connection coefficients ``N[i, a]`` (i horizontal, a vertical) likewise.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..config import NUMERICS_CONFIG
from ..errors import ChartMismatchError, ConfigError, DegenerateMetricError
from .grid import GridChart

logger = logging.getLogger(__name__)

SIGNATURES = ('riemannian', 'lorentz_v')


def _to_matrix_last(a: np.ndarray) -> np.ndarray:
    """(m, m, *grid) -> (*grid, m, m)"""
    return np.moveaxis(np.moveaxis(a, 0, -1), 0, -1)


def _from_matrix_last(a: np.ndarray) -> np.ndarray:
    """(*grid, m, m) -> (m, m, *grid)"""
    return np.moveaxis(np.moveaxis(a, -1, 0), -1, 0)


def block_det(block: np.ndarray) -> np.ndarray:
    return np.linalg.det(_to_matrix_last(block))


def block_inverse(block: np.ndarray) -> np.ndarray:
    return _from_matrix_last(np.linalg.inv(_to_matrix_last(block)))


@dataclass(frozen=True)
class NConnection:
    """Coefficients N_i^a stored as ``N[i, a]`` with i in (x1, x2), a in (t, y4)."""

    N: np.ndarray
    chart: GridChart

    def __post_init__(self):
        N = self.chart.check_field(self.N, 'N-connection')
        if N.shape[:2] != (2, 2):
            raise ChartMismatchError(f"N-connection components must be (2, 2), got {N.shape[:2]}")
        if not np.all(np.isfinite(N)):
            raise DegenerateMetricError("N-connection coefficients are not finite")
        object.__setattr__(self, 'N', N)

    @classmethod
    def zero(cls, chart: GridChart) -> 'NConnection':
        return cls(np.zeros((2, 2) + chart.shape), chart)

    @classmethod
    def from_wn(cls, w: np.ndarray, n: np.ndarray, chart: GridChart) -> 'NConnection':
        """N_i^3 = w_i, N_i^4 = n_i."""
        return cls(np.stack([np.asarray(w), np.asarray(n)], axis=1), chart)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.N)

    def frame_derivative(self, f: np.ndarray, alpha: int) -> np.ndarray:
        """e_alpha f for alpha in 0..3, acting on the trailing grid dims of ``f``."""
        if alpha not in range(4):
            raise ChartMismatchError(f"Frame index {alpha} out of range 0..3")
        chart = self.chart
        df = chart.derivative(f, alpha)
        if alpha >= 2:
            return df
        N = self.N[alpha]
        for a in (0, 1):
            if np.any(N[a]):
                df = df - N[a] * chart.derivative(f, 2 + a)
        return df

    def partial_derivatives(self) -> np.ndarray:
        """dN[b, i, a] = d N_i^a / d y^b."""
        return np.stack([self.chart.derivative(self.N, 2 + b) for b in (0, 1)])


def n_elongated_derivative(f: np.ndarray, dir: int, N: NConnection) -> np.ndarray:
    """N-elongated derivative along ``dir`` in 1..4.

    e_i f = d_i f - N_i^a d_a f for the h-directions 1, 2 and plain d_a f for
    the v-directions 3, 4.
    """
    if dir not in (1, 2, 3, 4):
        raise ChartMismatchError(f"Direction {dir} out of range 1..4")
    N.chart.check_field(f)
    return N.frame_derivative(f, dir - 1)


@dataclass(frozen=True)
class DMetric:
    """Block d-metric g = g_ij dx^i dx^j + h_ab e^a e^b on one chart."""

    g: np.ndarray
    h: np.ndarray
    n_conn: NConnection
    signature: str = 'riemannian'
    delta_nd: float = field(default=NUMERICS_CONFIG['delta_nd'])

    def __post_init__(self):
        chart = self.n_conn.chart
        g = chart.check_field(self.g, 'h-block')
        h = chart.check_field(self.h, 'v-block')
        for name, block in (('g', g), ('h', h)):
            if block.shape[:2] != (2, 2):
                raise ChartMismatchError(f"{name} must have (2, 2) components")
            if not np.all(np.isfinite(block)):
                raise DegenerateMetricError(f"{name} has non-finite entries")
            if not np.array_equal(block[0, 1], block[1, 0]):
                raise DegenerateMetricError(f"{name} is not symmetric")
        if self.signature not in SIGNATURES:
            raise ConfigError(f"Unknown signature flag '{self.signature}'")
        for name, block in (('h-block', g), ('v-block', h)):
            det = np.abs(block_det(block))
            if det.min() < self.delta_nd:
                raise DegenerateMetricError(
                    f"{name} determinant {det.min():.3e} below {self.delta_nd:g}",
                    details={'block': name, 'min_abs_det': float(det.min())})
        object.__setattr__(self, 'g', g)
        object.__setattr__(self, 'h', h)

    @property
    def chart(self) -> GridChart:
        return self.n_conn.chart

    @property
    def N(self) -> np.ndarray:
        return self.n_conn.N

    @property
    def g_inv(self) -> np.ndarray:
        return block_inverse(self.g)

    @property
    def h_inv(self) -> np.ndarray:
        return block_inverse(self.h)

    def adapted_metric(self) -> np.ndarray:
        """Block-diagonal 4x4 metric in the frame (e_i, d_a)."""
        G = np.zeros((4, 4) + self.chart.shape)
        G[:2, :2] = self.g
        G[2:, 2:] = self.h
        return G

    def volume_density(self) -> np.ndarray:
        """sqrt|det g| sqrt|det h|."""
        return np.sqrt(np.abs(block_det(self.g))) * np.sqrt(np.abs(block_det(self.h)))

    def volume_form(self) -> np.ndarray:
        """Density times quadrature weights."""
        return self.volume_density() * self.chart.weights()

    def frame_derivative(self, f: np.ndarray, alpha: int) -> np.ndarray:
        return self.n_conn.frame_derivative(f, alpha)

    def with_blocks(self, g: Optional[np.ndarray] = None,
                    h: Optional[np.ndarray] = None) -> 'DMetric':
        return DMetric(self.g if g is None else g, self.h if h is None else h,
                       self.n_conn, self.signature, self.delta_nd)

    def scaled(self, c_h: float, c_v: Optional[float] = None) -> 'DMetric':
        c_v = c_h if c_v is None else c_v
        return self.with_blocks(self.g * c_h, self.h * c_v)

    def to_fields(self) -> Dict[str, np.ndarray]:
        """Named component fields (upper triangles of the blocks plus N)."""
        fields = {}
        for i, j in ((0, 0), (0, 1), (1, 1)):
            fields[f"g{i + 1}{j + 1}"] = self.g[i, j]
            fields[f"h{i + 3}{j + 3}"] = self.h[i, j]
        for i in (0, 1):
            for a in (0, 1):
                fields[f"N{i + 1}_{a + 3}"] = self.N[i, a]
        return fields

    @classmethod
    def from_fields(cls, fields: Dict[str, np.ndarray], chart: GridChart,
                    signature: str = 'riemannian') -> 'DMetric':
        g = np.empty((2, 2) + chart.shape)
        h = np.empty((2, 2) + chart.shape)
        N = np.zeros((2, 2) + chart.shape)
        try:
            for i, j in ((0, 0), (0, 1), (1, 1)):
                g[i, j] = g[j, i] = fields[f"g{i + 1}{j + 1}"]
                h[i, j] = h[j, i] = fields[f"h{i + 3}{j + 3}"]
        except KeyError as e:
            raise ConfigError(f"Metric field {e} missing") from e
        for i in (0, 1):
            for a in (0, 1):
                key = f"N{i + 1}_{a + 3}"
                if key in fields:
                    N[i, a] = fields[key]
        return cls(g, h, NConnection(N, chart), signature)

    @classmethod
    def diagonal(cls, chart: GridChart, g11, g22, h33, h44,
                 N: Optional[np.ndarray] = None, signature: str = 'riemannian') -> 'DMetric':
        """Diagonal blocks from scalars or fields broadcast to the chart."""
        shape = chart.shape
        g = np.zeros((2, 2) + shape)
        h = np.zeros((2, 2) + shape)
        g[0, 0] = np.broadcast_to(g11, shape)
        g[1, 1] = np.broadcast_to(g22, shape)
        h[0, 0] = np.broadcast_to(h33, shape)
        h[1, 1] = np.broadcast_to(h44, shape)
        n_conn = NConnection.zero(chart) if N is None else NConnection(N, chart)
        return cls(g, h, n_conn, signature)

    @classmethod
    def flat(cls, chart: GridChart) -> 'DMetric':
        return cls.diagonal(chart, 1.0, 1.0, 1.0, 1.0)
