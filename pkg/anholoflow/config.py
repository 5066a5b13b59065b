"""
Default configuration for anholoflow runs.

Every tunable constant of the toolkit lives here as a module-level dictionary.
The pydantic schema in :mod:`anholoflow.schema` takes its defaults from these
dictionaries, so a run file only needs to name what it changes.
"""

# Grid chart used when a run file has no grid block.
# Axes are (x1, x2, t, y4); t is the anisotropic coordinate of the ansatz.
GRID_CONFIG = {
    'axes': [
        {'name': 'x1', 'min': 0.0, 'max': 1.0, 'count': 17, 'boundary': 'dirichlet'},
        {'name': 'x2', 'min': 0.0, 'max': 1.0, 'count': 17, 'boundary': 'dirichlet'},
        {'name': 't', 'min': 0.0, 'max': 1.0, 'count': 17, 'boundary': 'dirichlet'},
        {'name': 'y4', 'min': 0.0, 'max': 1.0, 'count': 3, 'boundary': 'periodic'},
    ],
    'min_points': 3,
}

# Tolerances and iteration budgets shared by all modules
NUMERICS_CONFIG = {
    'delta_nd': 1e-12,          # |det| gate for h- and v-blocks
    'eps_phi': 1e-8,            # lower bound on |d phi / dt|
    'tol_lap': 1e-10,           # 5-point Laplace residual
    'lap_max_iter': 5000,
    'tol_compat': 1e-6,
    'tol_mixed': 1e-6,
    'tol_mono': 1e-6,
    'tol_S': 1e-8,
    'tol_residual': 1e-4,       # ansatz defining-system residuals (fatal check)
    'tol_mass_drift': 5e-3,     # relative drift of the conserved potential mass
    'interior_margin': 2,       # points skipped at Dirichlet edges for 2nd-derivative residuals
    'newton_tol': 1e-12,
    'newton_max_iter': 50,
    'newton_max_halvings': 30,
}

# Anisotropic (ansatz) metric generation
ANSATZ_CONFIG = {
    'phi0': 't',
    'lambda': 0.25,
    'h4_0': '0',
    'n1': ['0', '0'],
    'n2': ['0', '0'],
    'psi_boundary': '0',
    'chi': [0.0],
    'signs': [1.0, 1.0],        # epsilon_3, epsilon_4 multiplying the v-block
    'noise': {
        'amplitude': 0.0,
        'correlation_time': 1.0,
        'modes': 4,
        'paths': 1,
        'max_attempts': 20,
    },
}

# Stochastic porous-media runs
SPDE_CONFIG = {
    'graph': {'variant': 'heaviside_soc', 'kappa': 0.5, 'c_u': 0.5},
    'domain': {
        'axes': [
            {'name': 'x1', 'min': 0.0, 'max': 1.0, 'count': 17},
            {'name': 'x2', 'min': 0.0, 'max': 1.0, 'count': 17},
        ],
        'psi': '0',
    },
    'noise': {
        'modes': 32,
        'nu_rule': 'power',     # nu_k = lambda_k ** nu_power
        'nu_power': -1.5,
        'nu_scale': 1.0,
        'l': None,              # None selects the first eigenfunction
        'offset': 0.0,
    },
    'initial': '0.2 + 0.4*exp(-((x1-0.5)**2 + (x2-0.5)**2)/0.02)',
    'dchi': 1e-3,
    'steps': 200,
    'paths': 1,
    'eps_min': 1e-6,
    'eps_coeff': 1.0,
    'burn_in': 0,
    'dense_eigen_limit': 2500,
    'eigen_tol': 1e-8,
    'positivity_tol': 1e-8,
}

# Geometric flows
FLOW_CONFIG = {
    'kind': 'general',
    'dchi': 1e-3,
    'steps': 50,
    'lambda': 0.0,
    'lambda_term': False,
    'tau0': 1.0,
    'snapshot_stride': 1,
    'with_tau_term': False,
    'omega_final': '1',
    'breather_tol': 1e-6,
}

# Perelman-type functionals
FUNCTIONALS_CONFIG = {
    'n': 2,
    'tau': 1.0,
    'f': '0',
    'normalize': True,
}

# Ensemble execution
ENSEMBLE_CONFIG = {
    'backend': 'serial',        # 'serial' or 'ray'
    'num_workers': None,
}

# Artifacts
OUTPUT_CONFIG = {
    'root': 'runs',
    'env_var': 'ANHOLOFLOW_OUTPUT_ROOT',
    'float_format': '.17g',
    'manifest_name': 'manifest.json',
}
