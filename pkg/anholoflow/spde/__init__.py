"""Stochastic porous-media equation with maximal monotone drift graphs."""

from .domain import Eigenpairs, SPDEDomain, eigensolve_laplacian, laplace_beltrami
from .graphs import (LinearGraph, MonotoneGraph, PiecewiseLinearGraph, SignPowerGraph,
                     graph_from_config, heaviside_soc, stefan)
from .noise import (NoiseSpec, draw_increments, noise_from_config, refine_increments,
                    sample_noise)
from .soc import self_convergence, soc_statistics
from .solver import (EnsembleResult, SPDESetup, SPDEState, TrajectoryRecord, ensemble_run,
                     run, run_path, step)

__all__ = [
    'Eigenpairs', 'SPDEDomain', 'eigensolve_laplacian', 'laplace_beltrami',
    'LinearGraph', 'MonotoneGraph', 'PiecewiseLinearGraph', 'SignPowerGraph',
    'graph_from_config', 'heaviside_soc', 'stefan',
    'NoiseSpec', 'draw_increments', 'noise_from_config', 'refine_increments', 'sample_noise',
    'self_convergence', 'soc_statistics',
    'EnsembleResult', 'SPDESetup', 'SPDEState', 'TrajectoryRecord', 'ensemble_run',
    'run', 'run_path', 'step',
]
