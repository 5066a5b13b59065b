"""
Four-coordinate grid charts and finite-difference operators.

A chart has axes (x1, x2, t, y4): the first two are horizontal (h) and the
last two vertical (v). Fields are numpy arrays whose trailing four dimensions
match the chart shape; any leading dimensions are component indices.
"""

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ..config import GRID_CONFIG
from ..errors import ChartMismatchError, ConfigError

logger = logging.getLogger(__name__)

BOUNDARY_KINDS = ('dirichlet', 'periodic')
H_INDICES = (0, 1)
V_INDICES = (2, 3)


@dataclass(frozen=True)
class Axis:
    """One coordinate axis of a chart."""

    name: str
    min: float
    max: float
    count: int
    boundary: str = 'dirichlet'

    def __post_init__(self):
        if self.boundary not in BOUNDARY_KINDS:
            raise ConfigError(f"Axis {self.name}: unknown boundary kind '{self.boundary}'")
        if self.count < GRID_CONFIG['min_points']:
            raise ConfigError(f"Axis {self.name}: need at least "
                              f"{GRID_CONFIG['min_points']} points, got {self.count}")
        if not np.isfinite(self.min) or not np.isfinite(self.max) or self.max <= self.min:
            raise ConfigError(f"Axis {self.name}: degenerate extent [{self.min}, {self.max}]")

    @property
    def periodic(self) -> bool:
        return self.boundary == 'periodic'

    @property
    def spacing(self) -> float:
        # a periodic axis identifies max with min, so it has count cells
        if self.periodic:
            return (self.max - self.min) / self.count
        return (self.max - self.min) / (self.count - 1)

    @property
    def points(self) -> np.ndarray:
        return self.min + self.spacing * np.arange(self.count)

    def weights(self) -> np.ndarray:
        """Trapezoid weights along the axis."""
        w = np.full(self.count, self.spacing)
        if not self.periodic:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w

    def derivative_matrix(self) -> sp.csr_matrix:
        """1-D first-derivative matrix matching :meth:`GridChart.derivative`."""
        n, h = self.count, self.spacing
        D = sp.lil_matrix((n, n))
        for i in range(1, n - 1):
            D[i, i - 1] = -1.0 / (2 * h)
            D[i, i + 1] = 1.0 / (2 * h)
        if self.periodic:
            D[0, n - 1] = -1.0 / (2 * h)
            D[0, 1] = 1.0 / (2 * h)
            D[n - 1, n - 2] = -1.0 / (2 * h)
            D[n - 1, 0] = 1.0 / (2 * h)
        else:
            D[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
            D[n - 1, n - 3:n] = np.array([1.0, -4.0, 3.0]) / (2 * h)
        return D.tocsr()

    def to_dict(self) -> Dict:
        return {'name': self.name, 'min': self.min, 'max': self.max,
                'count': self.count, 'boundary': self.boundary}

    @classmethod
    def from_dict(cls, data: Dict) -> 'Axis':
        return cls(name=str(data['name']), min=float(data['min']), max=float(data['max']),
                   count=int(data['count']), boundary=str(data.get('boundary', 'dirichlet')))


@dataclass(frozen=True)
class GridChart:
    """A single chart with four axes; h-indices (x1, x2), v-indices (t, y4)."""

    axes: Tuple[Axis, Axis, Axis, Axis]

    def __post_init__(self):
        if len(self.axes) != 4:
            raise ConfigError(f"A chart needs 4 axes, got {len(self.axes)}")
        object.__setattr__(self, 'axes', tuple(self.axes))

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return tuple(a.count for a in self.axes)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def spacings(self) -> Tuple[float, ...]:
        return tuple(a.spacing for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Coordinate arrays of the full grid (``ij`` indexing)."""
        return tuple(np.meshgrid(*(a.points for a in self.axes), indexing='ij'))

    def coordinate_dict(self) -> Dict[str, np.ndarray]:
        return dict(zip(self.names, self.coordinates()))

    def check_field(self, f: np.ndarray, what: str = 'field') -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-4:] != self.shape:
            raise ChartMismatchError(f"{what} has grid shape {f.shape[-4:]}, "
                                     f"chart has {self.shape}")
        return f

    def derivative(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Second-order first derivative along ``axis`` (0..3) of the trailing grid dims.

        Central differences inside, one-sided second-order stencils at
        Dirichlet edges, wrapped stencils on periodic axes.
        """
        if axis not in range(4):
            raise ChartMismatchError(f"Axis index {axis} out of range 0..3")
        f = np.asarray(f, dtype=float)
        ax = self.axes[axis]
        k = f.ndim - 4 + axis
        if ax.periodic:
            return (np.roll(f, -1, axis=k) - np.roll(f, 1, axis=k)) / (2 * ax.spacing)
        return np.gradient(f, ax.spacing, axis=k, edge_order=2)

    def derivative_matrix(self, axis: int) -> sp.csr_matrix:
        """Sparse matrix of :meth:`derivative` acting on C-order flattened fields."""
        mats = [sp.identity(a.count, format='csr') for a in self.axes]
        mats[axis] = self.axes[axis].derivative_matrix()
        return reduce(lambda A, B: sp.kron(A, B, format='csr'), mats)

    def weights(self) -> np.ndarray:
        """Quadrature weights (trapezoid in every axis)."""
        w = [a.weights() for a in self.axes]
        return np.einsum('i,j,k,l->ijkl', *w)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights() * f))

    def interior_mask(self, margin: int = 2) -> np.ndarray:
        """True away from Dirichlet edges (``margin`` points dropped per side)."""
        mask = np.ones(self.shape, dtype=bool)
        for k, a in enumerate(self.axes):
            if a.periodic or margin <= 0:
                continue
            m = min(margin, (a.count - 1) // 2)
            sl = [slice(None)] * 4
            sl[k] = slice(0, m)
            mask[tuple(sl)] = False
            sl[k] = slice(a.count - m, a.count)
            mask[tuple(sl)] = False
        return mask

    def refined(self, factor: int = 2) -> 'GridChart':
        """Chart with spacing divided by ``factor`` on non-trivial Dirichlet axes."""
        axes = []
        for a in self.axes:
            if a.periodic:
                axes.append(a)
            else:
                axes.append(Axis(a.name, a.min, a.max, (a.count - 1) * factor + 1, a.boundary))
        return GridChart(tuple(axes))

    def require_same(self, other: 'GridChart', what: str = 'operand') -> None:
        if self != other:
            raise ChartMismatchError(f"{what} lives on a different chart")

    def to_dict(self) -> Dict:
        return {'axes': [a.to_dict() for a in self.axes]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'GridChart':
        return cls(tuple(Axis.from_dict(a) for a in data['axes']))

    @classmethod
    def box(cls, extents: Sequence[Tuple[float, float]], counts: Sequence[int],
            boundaries: Optional[Sequence[str]] = None,
            names: Sequence[str] = ('x1', 'x2', 't', 'y4')) -> 'GridChart':
        boundaries = boundaries or ['dirichlet'] * 4
        return cls(tuple(Axis(n, float(lo), float(hi), int(c), b)
                         for n, (lo, hi), c, b in zip(names, extents, counts, boundaries)))

    @classmethod
    def default(cls) -> 'GridChart':
        return cls.from_dict(GRID_CONFIG)


def interior_max(values: np.ndarray, chart: GridChart, margin: int = 2) -> float:
    """Max-norm over the interior points of a (component-)field."""
    mask = chart.interior_mask(margin)
    v = np.abs(np.asarray(values))
    if not mask.any():
        return float(np.max(v)) if v.size else 0.0
    return float(np.max(v[..., mask])) if v.size else 0.0

def hold_edges(values: np.ndarray, chart: GridChart, margin: int = 2) -> np.ndarray:
    """Copy of a (component-)field whose ``margin`` outer layers on each Dirichlet
    axis repeat the first interior layer."""
    out = np.array(values, dtype=float, copy=True)
    lead = out.ndim - 4
    for k, a in enumerate(chart.axes):
        if a.periodic or margin <= 0:
            continue
        m = min(margin, (a.count - 1) // 2)
        if m == 0:
            continue
        layers = np.moveaxis(out, lead + k, 0)
        layers[:m] = layers[m]
        layers[a.count - m:] = layers[a.count - m - 1]
    return out
