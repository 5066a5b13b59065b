"""
Tests for drift graphs, the Dirichlet eigenproblem and the implicit SPDE stepper.
"""

import numpy as np
import pytest

from anholoflow.errors import ConfigError, NonEllipticError
from anholoflow.spde import (LinearGraph, SignPowerGraph, SPDEDomain, SPDESetup,
                             eigensolve_laplacian, ensemble_run, graph_from_config,
                             heaviside_soc, refine_increments, run_path, self_convergence,
                             soc_statistics, stefan)

LINE = {'axes': [{'name': 'x1', 'min': 0.0, 'max': 1.0, 'count': 33}], 'psi': '0'}


def line_setup(**overrides):
    block = {
        'graph': {'variant': 'heaviside_soc', 'kappa': 0.5, 'c_u': 0.5},
        'domain': LINE,
        'noise': {'modes': 4},
        'initial': '0.2 + 0.4*sin(pi*x1)',
        'dchi': 1e-3,
        'steps': 10,
    }
    block.update(overrides)
    return SPDESetup.from_config(block, seed=7)


def test_linear_resolvent():
    """J_eps(r) = r / (1 + eps a)."""
    g = LinearGraph(2.0)
    assert float(g.resolvent(0.5, 3.0)) == pytest.approx(1.5)
    assert float(g.yosida(0.5, 3.0)) == pytest.approx(3.0)


def test_sign_graph_soft_threshold():
    """alpha = 0 shrinks towards zero by eps * rho."""
    g = SignPowerGraph(rho=1.0, alpha=0.0)
    np.testing.assert_allclose(g.resolvent(0.1, [0.5, -0.5, 0.05]), [0.4, -0.4, 0.0])
    lo, hi = g.bounds(0.0)
    assert (float(lo), float(hi)) == (-1.0, 1.0)


def test_sign_power_resolvent_solves_its_equation():
    """x + eps rho x^alpha = |r| for the fractional power."""
    g = SignPowerGraph(rho=1.0, alpha=0.5)
    r = np.array([2.0, -0.3, 1e-4])
    x = g.resolvent(0.2, r)
    np.testing.assert_allclose(np.abs(x) + 0.2 * np.sqrt(np.abs(x)), np.abs(r), rtol=1e-12)
    assert np.all(np.sign(x) == np.sign(r))


def test_yosida_is_monotone():
    """Yosida approximations of a Stefan graph are non-decreasing."""
    g = stefan(0.0, 1.0, 1.0, 2.0)
    r = np.linspace(-2.0, 2.0, 401)
    assert np.all(np.diff(g.yosida(0.05, r)) >= -1e-12)
    assert np.all(g.yosida_derivative(0.05, r) >= 0)


def test_heaviside_graph_centered():
    """The centred graph contains zero at zero."""
    g = heaviside_soc(0.5, 0.5)
    lo, hi = g.bounds(0.0)
    assert hi < 0
    lo, hi = g.centered().bounds(0.0)
    assert float(lo) <= 0.0 <= float(hi)


@pytest.mark.parametrize('block', [
    {'variant': 'cubic'},
    {'variant': 'stefan', 'rho': 1.0},
    {'variant': 'heaviside_soc', 'kappa': 0.0, 'c_u': 0.5},
    {'variant': 'sign_power', 'rho': 1.0, 'alpha': 2.0},
])
def test_invalid_graphs_rejected(block):
    """Unknown variants, missing parameters and bad ranges are config errors."""
    with pytest.raises(ConfigError):
        graph_from_config(block)


def test_first_dirichlet_eigenvalue():
    """lambda_1 of -d^2/dx^2 on [0, 1] is pi^2."""
    domain = SPDEDomain.from_config(
        {'axes': [{'name': 'x1', 'min': 0.0, 'max': 1.0, 'count': 65}], 'psi': '0'})
    pairs = eigensolve_laplacian(domain, 4)
    assert pairs.values[0] == pytest.approx(np.pi ** 2, rel=1e-2)
    assert pairs.values[1] == pytest.approx(4 * np.pi ** 2, rel=1e-2)
    assert pairs.orthonormality < 1e-8


def test_square_eigenvalue():
    """lambda_1 on the unit square is 2 pi^2."""
    pairs = eigensolve_laplacian(SPDEDomain.from_config(), 3)
    assert pairs.values[0] == pytest.approx(2 * np.pi ** 2, rel=2e-2)


def test_lorentz_domain_rejected():
    """Laplace-Beltrami needs a Riemannian metric."""
    with pytest.raises(NonEllipticError):
        SPDEDomain.from_config({**LINE, 'signature': 'lorentz_v'})


def test_bridge_refinement_keeps_sums():
    """Each pair of fine increments sums to the coarse one."""
    rng = np.random.default_rng(0)
    coarse = rng.standard_normal((5, 3)) * 0.1
    fine = refine_increments(coarse, 0.01, rng)
    assert fine.shape == (10, 3)
    np.testing.assert_allclose(fine[0::2] + fine[1::2], coarse, atol=1e-15)


def test_zero_graph_without_noise_is_stationary():
    """Psi = 0 and nu = 0 leave U untouched."""
    setup = line_setup(graph={'variant': 'linear', 'a': 0.0},
                       noise={'modes': 4, 'nu_scale': 0.0}, steps=5)
    record = run_path(setup)
    np.testing.assert_allclose(record.final_U, setup.U0)


@pytest.mark.parametrize('graph', [
    {'variant': 'heaviside_soc', 'kappa': 0.5, 'c_u': 0.5},
    {'variant': 'stefan', 'chi0': 0.5, 'rho': 0.2, 'alpha1': 1.0, 'alpha2': 2.0},
    {'variant': 'sign_power', 'rho': 1.0, 'alpha': 0.5},
])
def test_path_is_reproducible_and_positive(graph):
    """Same seed and index replay the same noisy path; positivity holds for every graph."""
    setup = line_setup(graph=graph)
    a, b = run_path(setup, 0), run_path(setup, 0)
    np.testing.assert_array_equal(a.final_U, b.final_U)
    assert not np.array_equal(a.final_U, run_path(setup, 1).final_U)
    assert a.positivity_ok
    assert len(a.rows()) == setup.steps + 1


def test_trajectory_records_true_extrema():
    """min and max rows are the interior extrema, not clamped at zero."""
    setup = line_setup(noise={'modes': 4, 'nu_scale': 0.0}, steps=2)
    record = run_path(setup)
    assert record.u_min[0] == pytest.approx(float(setup.U0.min()))
    assert record.u_max[0] == pytest.approx(float(setup.U0.max()))
    assert record.u_min[0] > 0.2
    assert record.rows()[-1]['min'] > 0.0


def test_subcritical_start_is_absorbed():
    """U0 below c_u has zero supercritical measure throughout."""
    setup = line_setup(initial='0.2', steps=5)
    soc = soc_statistics([run_path(setup)])
    assert soc['absorption_flag'] is True
    assert not soc['inconclusive']


def test_supercritical_bump_relaxes():
    """A deterministic bump above c_u diffuses below it."""
    setup = line_setup(domain={**LINE, 'axes': [{**LINE['axes'][0], 'count': 65}]},
                       initial='0.2 + 0.6*exp(-(x1-0.5)**2/0.01)',
                       noise={'modes': 4, 'nu_scale': 0.0}, dchi=2e-4, steps=150)
    record = run_path(setup)
    assert record.m[0] > 0
    assert record.m[-1] < 0.01 * record.m[0]
    assert soc_statistics([record])['absorption_flag'] is True


def test_soc_without_paths_is_inconclusive():
    """No successful path, no verdict."""
    soc = soc_statistics([])
    assert soc['absorption_flag'] is None
    assert soc['inconclusive']


def test_ensemble_summary():
    """Three serial paths all succeed."""
    result = ensemble_run(line_setup(steps=4), 3)
    summary = result.summary()
    assert summary['paths'] == 3
    assert summary['failed'] == 0
    assert summary['positivity'] is True
    assert len(summary['m']['mean']) == 5


def test_self_convergence_first_order():
    """Halving dchi roughly halves the difference between levels."""
    setup = line_setup(graph={'variant': 'linear', 'a': 1.0},
                       noise={'modes': 4, 'nu_scale': 0.0}, dchi=4e-3, steps=5)
    out = self_convergence(setup, levels=3)
    d0, d1 = out['differences']
    assert d1 < d0
    assert out['orders'][0] > 0.4
    assert out['inner_solver_gap'] < 1e-6
