"""
Tests for per-path random streams and the ensemble executor.
"""

import numpy as np
import pytest

from anholoflow.ensemble import mean_stderr, path_rng, run_paths
from anholoflow.errors import ConfigError, ConvergenceError


def _draw(index, scale):
    return scale * path_rng(11, 'test', index).standard_normal(3)


def _fail_odd(index):
    if index % 2:
        raise ConvergenceError(f"path {index} diverged")
    return index


def test_streams_depend_on_seed_tag_and_index():
    """Streams are reproducible and distinct across seeds, tags and paths."""
    a = path_rng(1, 'spde.noise', 0).standard_normal(4)
    np.testing.assert_array_equal(a, path_rng(1, 'spde.noise', 0).standard_normal(4))
    for other in (path_rng(2, 'spde.noise', 0), path_rng(1, 'ansatz.phi', 0),
                  path_rng(1, 'spde.noise', 1)):
        assert not np.array_equal(a, other.standard_normal(4))


def test_serial_paths_in_order():
    """Results come back indexed and match a direct call."""
    results = run_paths(_draw, 3, {'scale': 2.0})
    assert [r.index for r in results] == [0, 1, 2]
    np.testing.assert_array_equal(results[2].value, _draw(2, 2.0))


def test_failed_paths_are_recorded():
    """A numerical failure marks its path and spares the rest."""
    results = run_paths(_fail_odd, 4)
    assert [r.failed for r in results] == [False, True, False, True]
    assert results[1].error.startswith('ConvergenceError')
    assert results[2].value == 2


def test_unknown_backend():
    """Only serial and ray backends exist."""
    with pytest.raises(ConfigError):
        run_paths(_draw, 1, {'scale': 1.0}, backend='threads')


def test_mean_stderr():
    """Standard error uses the sample deviation; one path has zero error."""
    stats = mean_stderr([np.array([1.0, 2.0]), np.array([3.0, 2.0])])
    np.testing.assert_allclose(stats['mean'], [2.0, 2.0])
    np.testing.assert_allclose(stats['stderr'], [1.0, 0.0])
    assert mean_stderr([np.array([5.0])])['stderr'][0] == 0.0
