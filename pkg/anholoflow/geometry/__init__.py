"""Nonholonomic charts, d-metrics, connections and curvature on grids."""

from .connections import (DConnection, canonical_dconnection, distortion, levi_civita,
                          metric_compat_residual, sample_connection, structure_functions,
                          torsion, torsion_report)
from .curvature import (CurvatureBundle, EinsteinResidual, curvature, einstein_residual,
                        lc_constraint_residual, ricci_tensor)
from .dmetric import DMetric, NConnection, block_det, block_inverse, n_elongated_derivative
from .grid import Axis, GridChart, hold_edges, interior_max
from .sasaki import sasaki_lift, spray_nconnection

__all__ = [
    'Axis', 'GridChart', 'hold_edges', 'interior_max',
    'NConnection', 'DMetric', 'n_elongated_derivative', 'block_det', 'block_inverse',
    'DConnection', 'canonical_dconnection', 'levi_civita', 'distortion',
    'metric_compat_residual', 'structure_functions', 'torsion', 'torsion_report',
    'sample_connection',
    'CurvatureBundle', 'EinsteinResidual', 'curvature', 'einstein_residual',
    'lc_constraint_residual', 'ricci_tensor',
    'sasaki_lift', 'spray_nconnection',
]
