"""
Tests for charts, d-metrics, connections and curvature.
"""

import numpy as np
import pytest

from anholoflow.ansatz import generate
from anholoflow.errors import ChartMismatchError, ConfigError, DegenerateMetricError
from anholoflow.geometry import (Axis, DMetric, GridChart, NConnection, canonical_dconnection,
                                 curvature, distortion, einstein_residual, hold_edges,
                                 interior_max, levi_civita, metric_compat_residual,
                                 n_elongated_derivative, sample_connection, sasaki_lift, torsion,
                                 torsion_report)


def test_periodic_axis_spacing():
    """A periodic axis identifies its end points."""
    axis = Axis('y4', 0.0, 1.0, 8, 'periodic')
    assert axis.spacing == pytest.approx(1.0 / 8)
    assert Axis('x1', 0.0, 1.0, 9).spacing == pytest.approx(1.0 / 8)


def test_axis_rejects_too_few_points():
    """Axes need at least three points and a positive extent."""
    with pytest.raises(ConfigError):
        Axis('x1', 0.0, 1.0, 2)
    with pytest.raises(ConfigError):
        Axis('x1', 1.0, 1.0, 5)


def test_derivative_matrix_matches_derivative(periodic_chart, ansatz_chart):
    """The sparse derivative reproduces the array derivative on both boundary kinds."""
    for chart in (periodic_chart, ansatz_chart):
        rng = np.random.default_rng(0)
        f = rng.standard_normal(chart.shape)
        for axis in range(4):
            dense = chart.derivative(f, axis).ravel()
            sparse = chart.derivative_matrix(axis) @ f.ravel()
            np.testing.assert_allclose(sparse, dense, atol=1e-10)


def test_periodic_derivative_of_sine(periodic_chart):
    """Central differences of sin(2 pi x1) approach 2 pi cos(2 pi x1)."""
    x1 = periodic_chart.coordinates()[0]
    d = periodic_chart.derivative(np.sin(2 * np.pi * x1), 0)
    h = periodic_chart.axes[0].spacing
    expected = np.sin(2 * np.pi * h) / h * np.cos(2 * np.pi * x1)
    np.testing.assert_allclose(d, expected, atol=1e-12)


def test_derivative_axis_out_of_range(periodic_chart):
    """Axis indices outside 0..3 are chart errors."""
    with pytest.raises(ChartMismatchError):
        periodic_chart.derivative(np.zeros(periodic_chart.shape), 4)


def test_check_field_shape(periodic_chart, ansatz_chart):
    """Fields from another chart are rejected."""
    with pytest.raises(ChartMismatchError):
        periodic_chart.check_field(np.zeros(ansatz_chart.shape))


def test_quadrature_integrates_volume(ansatz_chart):
    """Trapezoid weights integrate 1 to the box volume."""
    assert ansatz_chart.integrate(np.ones(ansatz_chart.shape)) == pytest.approx(1.0)


def test_n_elongated_derivative_of_linear_field():
    """e_1 f = d_1 f - N_1^a d_a f is exact for linear fields."""
    chart = GridChart.box([(0.0, 1.0)] * 4, [5, 5, 5, 5])
    x1, _, t, y4 = chart.coordinates()
    f = x1 + 2.0 * t - y4
    N = np.zeros((2, 2) + chart.shape)
    N[0, 0] = 0.5
    N[1, 1] = 3.0
    conn = NConnection(N, chart)
    np.testing.assert_allclose(n_elongated_derivative(f, 1, conn), 0.0, atol=1e-12)
    np.testing.assert_allclose(n_elongated_derivative(f, 2, conn), 3.0, atol=1e-12)
    np.testing.assert_allclose(n_elongated_derivative(f, 3, conn), 2.0, atol=1e-12)
    with pytest.raises(ChartMismatchError):
        n_elongated_derivative(f, 5, conn)


def test_degenerate_metric_rejected(periodic_chart):
    """A vanishing block determinant is a degeneracy error."""
    with pytest.raises(DegenerateMetricError):
        DMetric.diagonal(periodic_chart, 1.0, 0.0, 1.0, 1.0)


def test_unknown_signature_rejected(periodic_chart):
    """Signature flags are riemannian or lorentz_v."""
    with pytest.raises(ConfigError):
        DMetric.diagonal(periodic_chart, 1.0, 1.0, 1.0, 1.0, signature='euclid')


def test_metric_fields_roundtrip(closed_form_data):
    """Named component fields rebuild the same d-metric."""
    m = generate(closed_form_data).to_dmetric()
    back = DMetric.from_fields(m.to_fields(), m.chart, m.signature)
    np.testing.assert_array_equal(back.g, m.g)
    np.testing.assert_array_equal(back.h, m.h)
    np.testing.assert_array_equal(back.N, m.N)


def test_canonical_connection_metric_compatible(closed_form_data):
    """The canonical d-connection is metric compatible on a non-trivial N."""
    data = closed_form_data
    data.n2[0] = 1.0
    m = generate(data).to_dmetric()
    assert not m.n_conn.is_zero
    assert metric_compat_residual(m, canonical_dconnection(m)) < 1e-9


def test_canonical_connection_pure_torsion_vanishes(closed_form_data):
    """hh-h and vv-v torsion of the canonical d-connection vanish."""
    data = closed_form_data
    data.n2[0] = 1.0
    report = torsion_report(generate(data).to_dmetric())
    assert report['T_hhh'] < 1e-10
    assert report['T_vvv'] < 1e-10
    assert report['max'] >= report['T_vhh']


def test_levi_civita_torsion_free_and_compatible(closed_form_data):
    """The Koszul connection is metric compatible and torsion free."""
    data = closed_form_data
    data.n2[0] = 1.0
    m = generate(data).to_dmetric()
    lc = levi_civita(m)
    assert lc.tag == 'levi_civita'
    assert float(np.max(np.abs(torsion(m, lc)))) < 1e-9
    assert metric_compat_residual(m, lc) < 1e-9


def test_distortion_vanishes_for_product_metric(product_metric):
    """With N = 0, g(x) and h(y) both connections coincide."""
    assert float(np.max(np.abs(distortion(product_metric)))) < 1e-12


def test_flat_metric_has_no_curvature(periodic_chart):
    """Constant blocks give zero Ricci."""
    b = curvature(DMetric.diagonal(periodic_chart, 2.0, 1.0, 3.0, 1.0))
    assert float(np.max(np.abs(b.ricci))) == 0.0
    assert float(np.max(np.abs(b.scalar))) == 0.0


def test_round_sphere_scalar_curvature(round_sphere):
    """R = 2 on the unit sphere, S = 0 on the flat v-block."""
    b = curvature(round_sphere)
    assert interior_max(b.scalar_h - 2.0, round_sphere.chart) < 1e-2
    assert float(np.max(np.abs(b.scalar_v))) < 1e-12
    assert b.mixed_norm(round_sphere.chart) < 1e-12


def test_edge_layers_keep_interior_mixed_ricci(round_sphere):
    """Dirichlet edge layers repeat R of the first interior layer."""
    R = curvature(round_sphere).scalar_h
    np.testing.assert_allclose(R[:2], np.broadcast_to(R[2], R[:2].shape), rtol=1e-12)
    np.testing.assert_allclose(R[-2:], np.broadcast_to(R[-3], R[-2:].shape), rtol=1e-12)
    assert float(np.max(np.abs(R - 2.0))) < 1e-2


def test_hold_edges_only_touches_dirichlet_axes():
    """Periodic axes pass through, Dirichlet margins copy the nearest interior layer."""
    chart = GridChart.box([(0.0, 1.0)] * 4, [9, 4, 3, 3],
                          ['dirichlet', 'periodic', 'periodic', 'periodic'])
    x1, x2 = chart.coordinates()[:2]
    field = np.stack([x1, x2])
    held = hold_edges(field, chart, margin=2)
    np.testing.assert_array_equal(held[1], x2)
    np.testing.assert_array_equal(held[0, :2], np.broadcast_to(x1[2], (2,) + x1.shape[1:]))
    np.testing.assert_array_equal(held[0, -2:], np.broadcast_to(x1[-3], (2,) + x1.shape[1:]))
    np.testing.assert_array_equal(held[0, 2:-2], x1[2:-2])
    np.testing.assert_array_equal(field[0], x1)


def test_einstein_residual_split(round_sphere):
    """In two dimensions Ric = R g / 2, so the h-block Einstein tensor vanishes."""
    res = einstein_residual(round_sphere)
    assert res.h_norm < 1e-2
    assert res.v_norm == pytest.approx(1.0, rel=1e-2)
    assert res.to_dict()['max_norm'] == res.max_norm


def test_sample_connection_blocks(periodic_chart):
    """Analytic blocks land in their adapted-frame slots."""
    c = sample_connection(periodic_chart, {'C_v': np.ones((2, 2, 2) + periodic_chart.shape)})
    assert float(np.max(np.abs(c.C_v))) == 1.0
    assert float(np.max(np.abs(c.L_h))) == 0.0


def test_sasaki_lift_of_quadratic_lagrangian():
    """L = t^2 + y4^2 lifts to the identity with a vanishing spray N."""
    chart = GridChart.box([(0.0, 1.0)] * 4, [5, 5, 5, 5])
    m = sasaki_lift('t**2 + y4**2', chart)
    np.testing.assert_allclose(m.h[0, 0], 1.0, atol=1e-10)
    np.testing.assert_allclose(m.h[0, 1], 0.0, atol=1e-10)
    np.testing.assert_allclose(m.g, m.h)
    np.testing.assert_allclose(m.N, 0.0, atol=1e-10)


def test_sasaki_lift_rejects_singular_lagrangian():
    """A Lagrangian linear in y has a degenerate Hessian."""
    chart = GridChart.box([(0.0, 1.0)] * 4, [5, 5, 5, 5])
    with pytest.raises(DegenerateMetricError):
        sasaki_lift('t + y4', chart)
