"""
Random generating functions: phi0 plus Ornstein-Uhlenbeck coefficients on the
lowest sine modes of the (x1, x2) rectangle, constant in t.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..config import ANSATZ_CONFIG
from ..errors import AnholoflowError, ConfigError, GeneratingFunctionError
from ..ensemble import path_rng
from ..geometry import GridChart

logger = logging.getLogger(__name__)

RNG_TAG = 'ansatz.phi'


def low_modes(chart: GridChart, count: int) -> List[np.ndarray]:
    """The ``count`` sine modes sin(p pi xi1) sin(q pi xi2) of lowest p^2 + q^2."""
    x1, x2 = chart.coordinates()[:2]
    a1, a2 = chart.axes[0], chart.axes[1]
    xi1 = (x1 - a1.min) / (a1.max - a1.min)
    xi2 = (x2 - a2.min) / (a2.max - a2.min)
    side = int(np.ceil(np.sqrt(count))) + 1
    pairs = sorted(((p, q) for p in range(1, side + 1) for q in range(1, side + 1)),
                   key=lambda pq: (pq[0] ** 2 + pq[1] ** 2, pq))
    return [np.sin(p * np.pi * xi1) * np.sin(q * np.pi * xi2) for p, q in pairs[:count]]


def ou_coefficients(rng: np.random.Generator, chi: Sequence[float], modes: int,
                    amplitude: float, correlation_time: float) -> np.ndarray:
    """Stationary OU paths, shape (len(chi), modes), zero mean, variance amplitude^2."""
    chi = np.asarray(chi, dtype=float)
    coeffs = np.zeros((len(chi), modes))
    if amplitude == 0.0 or modes == 0:
        return coeffs
    coeffs[0] = amplitude * rng.standard_normal(modes)
    for m in range(1, len(chi)):
        decay = np.exp(-(chi[m] - chi[m - 1]) / correlation_time)
        coeffs[m] = (decay * coeffs[m - 1]
                     + amplitude * np.sqrt(1.0 - decay ** 2) * rng.standard_normal(modes))
    return coeffs


def sample_random_phi(phi0: np.ndarray, noise: Optional[Dict], seed: int, chi: Sequence[float],
                      chart: GridChart, path_index: int = 0,
                      admissible: Optional[Callable[[np.ndarray], None]] = None) -> np.ndarray:
    """Random phi family of shape (len(chi),) + chart.shape for one path.

    ``phi0`` holds the sure samples (same leading shape). ``admissible`` may
    raise a toolkit error to reject a draw; rejected draws are redrawn from the
    path's stream up to ``max_attempts`` times.
    """
    cfg = {**ANSATZ_CONFIG['noise'], **(noise or {})}
    amplitude = float(cfg['amplitude'])
    if amplitude < 0 or cfg['correlation_time'] <= 0:
        raise ConfigError("noise amplitude must be >= 0 and correlation_time > 0")
    phi0 = np.asarray(phi0, dtype=float)
    if phi0.shape == chart.shape:
        phi0 = np.broadcast_to(phi0, (len(chi),) + chart.shape)
    if amplitude == 0.0:
        return phi0.copy()

    modes = low_modes(chart, int(cfg['modes']))
    rng = path_rng(seed, RNG_TAG, path_index)
    last_error = None
    for attempt in range(int(cfg['max_attempts'])):
        coeffs = ou_coefficients(rng, chi, len(modes), amplitude, float(cfg['correlation_time']))
        phi = phi0 + np.einsum('mk,k...->m...', coeffs, np.stack(modes))
        try:
            if admissible is not None:
                for sample in phi:
                    admissible(sample)
            return phi
        except AnholoflowError as e:
            last_error = e
            logger.debug(f"path {path_index}: phi draw {attempt} rejected ({e})")
    raise GeneratingFunctionError(
        f"random phi rejected {cfg['max_attempts']} times; noise amplitude "
        f"{amplitude:g} too large ({last_error})",
        details={'path_index': path_index, 'attempts': int(cfg['max_attempts'])})
