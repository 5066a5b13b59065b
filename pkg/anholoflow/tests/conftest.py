"""
Shared fixtures: small charts and metrics that keep the suite at desk scale.
"""

import numpy as np
import pytest

from anholoflow.ansatz import GeneratingData, field_from
from anholoflow.geometry import DMetric, GridChart


@pytest.fixture
def periodic_chart():
    """8^4 fully periodic unit box."""
    return GridChart.box([(0.0, 1.0)] * 4, [8, 8, 8, 8], ['periodic'] * 4)


@pytest.fixture
def ansatz_chart():
    """Dirichlet (x1, x2, t), periodic y4."""
    return GridChart.box([(0.0, 1.0)] * 4, [17, 17, 17, 3],
                         ['dirichlet', 'dirichlet', 'dirichlet', 'periodic'])


@pytest.fixture
def closed_form_data(ansatz_chart):
    """phi = t, lambda = 1/4: h4 = exp(2t), h3 = 4."""
    return GeneratingData.from_config(ansatz_chart, {'phi0': 't', 'lambda': 0.25})


@pytest.fixture
def product_metric(periodic_chart):
    """N = 0, g depending on x only and h on y only."""
    c = periodic_chart
    two_pi = 2.0 * np.pi
    return DMetric.diagonal(
        c,
        field_from(f"1 + 0.1*sin({two_pi}*x1)", c),
        field_from(f"1 + 0.1*cos({two_pi}*x2)", c),
        field_from(f"2 + 0.2*sin({two_pi}*t)", c),
        1.0,
    )


@pytest.fixture
def sphere_chart():
    """Polar angle away from the poles, periodic azimuth, trivial v-directions."""
    return GridChart.box([(0.5, np.pi - 0.5), (0.0, 2.0 * np.pi), (0.0, 1.0), (0.0, 1.0)],
                         [129, 8, 3, 3], ['dirichlet', 'periodic', 'periodic', 'periodic'])


@pytest.fixture
def round_sphere(sphere_chart):
    """Unit round sphere on the h-block, flat v-block."""
    theta = sphere_chart.coordinates()[0]
    return DMetric.diagonal(sphere_chart, 1.0, np.sin(theta) ** 2, 1.0, 1.0)
