"""Anisotropic ansatz generated by a function phi and a source constant lambda."""

from .data import AnsatzMetric, GeneratingData, check_phi_star, field_from, phi_star
from .random_phi import low_modes, ou_coefficients, sample_random_phi
from .solver import (AnsatzResiduals, assemble, build_h3, build_h4, build_n, build_w,
                     generate, generate_family, laplace_residual, laplacian_5pt,
                     residual_system, solve_psi)

__all__ = [
    'AnsatzMetric', 'GeneratingData', 'check_phi_star', 'field_from', 'phi_star',
    'low_modes', 'ou_coefficients', 'sample_random_phi',
    'AnsatzResiduals', 'assemble', 'build_h3', 'build_h4', 'build_n', 'build_w',
    'generate', 'generate_family', 'laplace_residual', 'laplacian_5pt',
    'residual_system', 'solve_psi',
]
