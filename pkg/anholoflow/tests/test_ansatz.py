"""
Tests for the generating data, the ansatz solver and random generating functions.
"""

import numpy as np
import pytest

from anholoflow.ansatz import (GeneratingData, generate, generate_family, laplace_residual,
                               low_modes, ou_coefficients, residual_system, sample_random_phi,
                               solve_psi)
from anholoflow.errors import ConfigError, GeneratingFunctionError
from anholoflow.flow import flow_step_ansatz
from anholoflow.geometry import GridChart, lc_constraint_residual


def test_closed_form_solution(closed_form_data):
    """phi = t, lambda = 1/4 gives h4 = exp(2t), h3 = 4 and w = n = 0."""
    am = generate(closed_form_data)
    t = am.chart.coordinates()[2]
    np.testing.assert_allclose(am.h4, np.exp(2 * t), rtol=1e-12)
    np.testing.assert_allclose(am.h3, 4.0, rtol=1e-10)
    np.testing.assert_allclose(am.w, 0.0, atol=1e-12)
    np.testing.assert_allclose(am.n, 0.0, atol=1e-12)
    assert am.signature == 'riemannian'


def test_closed_form_residuals(closed_form_data):
    """The defining equations hold up to discretization error."""
    res = residual_system(generate(closed_form_data), closed_form_data.phi[0], 0.25)
    assert res.eq1 < 1e-10
    assert res.eq2 is None
    assert res.eq3 < 1e-12
    assert res.eq4 < 1e-12
    assert res.max_system < 0.1
    report = res.to_dict()
    assert {'eq1', 'eq2', 'eq3', 'eq4', 'auxphi', 'ep2a', 'lc', 'einstein'} <= set(report)
    assert set(report['lc']) == {'w_star', 'ew_sym', 'n_star', 'dn_sym'}


def test_residuals_shrink_under_refinement(ansatz_chart):
    """Halving the spacing cuts the h4* residual by about four."""
    errors = []
    for chart in (ansatz_chart, ansatz_chart.refined()):
        data = GeneratingData.from_config(chart, {'phi0': 't', 'lambda': 0.25})
        errors.append(residual_system(generate(data), data.phi[0], 0.25).ep2a)
    assert 3.0 < errors[0] / errors[1] < 5.0


def test_einstein_residual_shrinks_under_refinement(ansatz_chart):
    """The closed-form metric solves the Einstein equations to second order."""
    errors = []
    for chart in (ansatz_chart, ansatz_chart.refined()):
        data = GeneratingData.from_config(chart, {'phi0': 't', 'lambda': 0.25})
        res = residual_system(generate(data), data.phi[0], 0.25, with_einstein=True)
        errors.append(res.einstein['max_norm'])
    assert errors[1] < 1e-3
    assert 3.0 < errors[0] / errors[1] < 5.0


@pytest.mark.parametrize('phi0, lam', [
    ('t + 0.1*sin(pi*x1)*sin(pi*x2)', 0.25),
    ('2*t + 0.2*x1', 0.5),
])
def test_defining_system_for_other_generating_functions(ansatz_chart, phi0, lam):
    """eq1, eq3 and eq4 hold exactly, auxphi and ep2a converge at second order."""
    results = []
    for chart in (ansatz_chart, ansatz_chart.refined()):
        data = GeneratingData.from_config(chart, {'phi0': phi0, 'lambda': lam})
        results.append(residual_system(generate(data), data.phi[0], lam))
    coarse, fine = results
    for res in results:
        assert res.eq1 < 1e-10
        assert res.eq3 < 1e-10
        assert res.eq4 < 1e-10
        assert res.auxphi < 5e-2
    assert 3.0 < coarse.auxphi / fine.auxphi < 5.5
    assert 3.0 < coarse.ep2a / fine.ep2a < 5.5


def test_levi_civita_constraints_hold_for_compatible_phi(closed_form_data):
    """With 2n = 0 and phi = t all zero-torsion constraints vanish."""
    am = generate(closed_form_data)
    lc = lc_constraint_residual(am.chart, am.h4, am.w, am.n)
    assert max(lc.values()) < 1e-6


def test_levi_civita_constraints_fail_with_integration_function(closed_form_data):
    """A nonzero 2n makes n_i depend on t."""
    data = closed_form_data
    data.n2[0] = 1.0
    am = generate(data)
    lc = lc_constraint_residual(am.chart, am.h4, am.w, am.n)
    assert lc['n_star'] >= 1e-2


def test_lambda_zero_rejected(ansatz_chart):
    """lambda = 0 leaves h4 undefined."""
    with pytest.raises(ConfigError):
        GeneratingData.from_config(ansatz_chart, {'phi0': 't', 'lambda': 0.0})


def test_flat_generating_function_rejected(ansatz_chart):
    """phi independent of t has phi* = 0."""
    with pytest.raises(GeneratingFunctionError):
        GeneratingData.from_config(ansatz_chart, {'phi0': 'x1', 'lambda': 0.25})


def test_periodic_t_axis_rejected():
    """The anisotropic coordinate needs Dirichlet ends."""
    chart = GridChart.box([(0.0, 1.0)] * 4, [5, 5, 5, 3], ['dirichlet'] * 2 + ['periodic'] * 2)
    with pytest.raises(ConfigError):
        GeneratingData.from_config(chart, {'phi0': 't'})


def test_lorentz_signs(ansatz_chart):
    """A negative v-sign flags the metric as Lorentzian."""
    data = GeneratingData.from_config(ansatz_chart, {'phi0': 't', 'signs': [1.0, -1.0]})
    am = generate(data)
    assert am.signature == 'lorentz_v'
    assert float(np.max(am.to_dmetric().h[1, 1])) < 0


def test_harmonic_psi_reproduces_linear_data(ansatz_chart):
    """Linear boundary data is harmonic, so psi equals it everywhere."""
    x1, x2 = ansatz_chart.coordinates()[:2]
    psi = solve_psi(x1 - 2 * x2, ansatz_chart)
    np.testing.assert_allclose(psi, x1 - 2 * x2, atol=1e-9)
    assert laplace_residual(psi[:, :, 0, 0], ansatz_chart) < 1e-8


def test_family_follows_chi_samples(ansatz_chart):
    """One metric per chi sample, tagged with its chi."""
    data = GeneratingData.from_config(ansatz_chart, {'phi0': 't*(1 + chi)', 'chi': [0.0, 0.5]})
    family = generate_family(data)
    assert [am.chi for am in family] == [0.0, 0.5]
    assert float(np.max(family[1].h4)) > float(np.max(family[0].h4))


def test_flow_rates_close_the_defining_system(closed_form_data):
    """After one flow step the stored rates satisfy the chi-evolution equations."""
    am = generate(closed_form_data)
    phi = closed_form_data.phi[0]
    stepped = flow_step_ansatz(am, phi, 1e-3)
    res = residual_system(stepped, phi, 0.25)
    assert res.eq2 is not None
    assert res.eq2 < 1e-12


def test_random_phi_is_reproducible(ansatz_chart):
    """Same (seed, path) gives the same draw; another path differs."""
    phi0 = ansatz_chart.coordinates()[2][None]
    noise = {'amplitude': 0.01, 'modes': 3}
    a = sample_random_phi(phi0, noise, 42, [0.0], ansatz_chart, path_index=1)
    b = sample_random_phi(phi0, noise, 42, [0.0], ansatz_chart, path_index=1)
    c = sample_random_phi(phi0, noise, 42, [0.0], ansatz_chart, path_index=2)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_zero_amplitude_returns_phi0(ansatz_chart):
    """Without noise the sure samples come back unchanged."""
    phi0 = ansatz_chart.coordinates()[2][None]
    out = sample_random_phi(phi0, {'amplitude': 0.0}, 1, [0.0], ansatz_chart)
    np.testing.assert_array_equal(out, phi0)


def test_random_phi_rejects_inadmissible_draws(ansatz_chart):
    """A huge amplitude with an always-failing check exhausts the attempts."""
    phi0 = ansatz_chart.coordinates()[2][None]

    def reject(phi):
        raise GeneratingFunctionError("rejected")

    with pytest.raises(GeneratingFunctionError):
        sample_random_phi(phi0, {'amplitude': 1.0, 'max_attempts': 3}, 0, [0.0], ansatz_chart,
                          admissible=reject)


def test_ou_coefficients_shape_and_decay():
    """OU coefficients have one row per chi sample."""
    rng = np.random.default_rng(3)
    coeffs = ou_coefficients(rng, [0.0, 0.1, 0.2], 4, 0.5, 1.0)
    assert coeffs.shape == (3, 4)
    assert np.all(ou_coefficients(rng, [0.0, 1.0], 4, 0.0, 1.0) == 0.0)


def test_low_modes_vanish_on_the_boundary(ansatz_chart):
    """Sine modes keep the Dirichlet edges of the (x1, x2) rectangle."""
    modes = low_modes(ansatz_chart, 3)
    assert len(modes) == 3
    for mode in modes:
        np.testing.assert_allclose(mode[0], 0.0, atol=1e-12)
        np.testing.assert_allclose(mode[:, -1], 0.0, atol=1e-12)
