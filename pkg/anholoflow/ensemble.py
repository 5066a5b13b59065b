"""
Deterministic per-path random streams and the ensemble executor.

Every stochastic path owns a ``Generator(Philox(SeedSequence(...)))`` derived
from (master seed, tag, path index), so results do not depend on the backend
or on the order in which paths finish.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .config import ENSEMBLE_CONFIG
from .errors import AnholoflowError, ConfigError

logger = logging.getLogger(__name__)


def stable_hash_int(tag: str) -> int:
    digest = hashlib.sha256(tag.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little', signed=False)


def path_seed_sequence(seed: int, tag: str, index: int) -> SeedSequence:
    return SeedSequence(entropy=[int(seed), stable_hash_int(tag)], spawn_key=(int(index),))


def path_rng(seed: int, tag: str, index: int) -> Generator:
    """Random stream of path ``index`` under ``tag``."""
    return Generator(Philox(path_seed_sequence(seed, tag, index)))


@dataclass
class PathResult:
    index: int
    value: Any = None
    failed: bool = False
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {'index': self.index, 'failed': self.failed, 'error': self.error}


def _safe_call(worker: Callable, index: int, kwargs: Dict[str, Any]) -> PathResult:
    try:
        return PathResult(index=index, value=worker(index=index, **kwargs))
    except AnholoflowError as e:
        return PathResult(index=index, failed=True, error=f"{type(e).__name__}: {e}")


def run_paths(worker: Callable, n_paths: int, kwargs: Optional[Dict[str, Any]] = None,
              backend: str = ENSEMBLE_CONFIG['backend'],
              num_workers: Optional[int] = ENSEMBLE_CONFIG['num_workers']) -> List[PathResult]:
    """Run ``worker(index=p, **kwargs)`` for p in range(n_paths).

    Numerical failures of a path are recorded on its PathResult and never
    abort the ensemble.
    """
    kwargs = kwargs or {}
    if backend == 'serial':
        results = [_safe_call(worker, p, kwargs) for p in range(n_paths)]
    elif backend == 'ray':
        results = _run_ray(worker, n_paths, kwargs, num_workers)
    else:
        raise ConfigError(f"Unknown ensemble backend '{backend}'")
    failed = sum(r.failed for r in results)
    if failed:
        logger.warning(f"{failed}/{n_paths} ensemble paths failed")
    logger.info(f"Ensemble finished: {n_paths - failed}/{n_paths} paths ok ({backend})")
    return results


def _run_ray(worker: Callable, n_paths: int, kwargs: Dict[str, Any],
             num_workers: Optional[int]) -> List[PathResult]:
    try:
        import ray
    except ImportError as e:
        raise ConfigError("The ray backend needs the 'parallel' extra (pip install anholoflow[parallel])") from e
    try:
        ray.init(ignore_reinit_error=True, num_cpus=num_workers, include_dashboard=False)
        remote_call = ray.remote(_safe_call)
        shared = ray.put(kwargs)
        refs = [remote_call.remote(worker, p, shared) for p in range(n_paths)]
        results = ray.get(refs)
    finally:
        ray.shutdown()
    return sorted(results, key=lambda r: r.index)


def mean_stderr(values: Sequence[np.ndarray]) -> Dict[str, np.ndarray]:
    """Ensemble mean and standard error along the path axis."""
    arr = np.asarray(values, dtype=float)
    n = arr.shape[0]
    mean = arr.mean(axis=0)
    stderr = arr.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return {'mean': mean, 'stderr': stderr, 'n': n}
