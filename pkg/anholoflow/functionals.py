"""
N-adapted Perelman-type functionals and their thermodynamic values.

With n = 2, mu = (4 pi tau)^(-n) exp(-f) and dV the N-adapted volume form:

    F     = int (R + S + |Df|^2) exp(-f) dV
    W     = int [tau (R + S + |Df|^2) + f - 2n] mu dV
    E     = -tau^2 int (R + S + |Df|^2 - n/tau) mu dV
    S     = -W
    sigma = 2 tau^4 int (|Ric_h + Hess_h f - g/2tau|^2 + |Ric_v + Hess_v f - h/2tau|^2) mu dV
    log Z = int (-f + n) mu dV

R and S are the h- and v-scalar curvatures of the chosen connection
(canonical d-connection unless a connection is passed).
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .config import FUNCTIONALS_CONFIG, NUMERICS_CONFIG
from .errors import ConfigError, NumericalError
from .geometry import (CurvatureBundle, DConnection, DMetric, canonical_dconnection, curvature,
                       hold_edges, levi_civita)

logger = logging.getLogger(__name__)

N_DIM = FUNCTIONALS_CONFIG['n']


@dataclass
class FunctionalReport:
    F: float
    W: float
    E: float
    S_entropy: float
    sigma: float
    Z_log: float
    connection_tag: str = 'canonical_d'
    tau: float = 1.0
    n: int = N_DIM
    closure_gap: float = 0.0

    def to_dict(self) -> Dict:
        return asdict(self)


def _integrate(m: DMetric, values: np.ndarray) -> float:
    # densities near Dirichlet edges follow the same rule as the curvature
    values = hold_edges(values, m.chart, NUMERICS_CONFIG['interior_margin'])
    total = float(np.sum(values * m.volume_form()))
    if not np.isfinite(total):
        raise NumericalError("functional integral is not finite")
    return total


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ConfigError(f"tau must be positive, got {tau}")


def frame_gradient(m: DMetric, f: np.ndarray) -> np.ndarray:
    """(e_1 f, e_2 f, d_3 f, d_4 f)"""
    return np.stack([m.frame_derivative(f, a) for a in range(4)])


def grad_sq(m: DMetric, f: np.ndarray) -> np.ndarray:
    """|Df|^2 = g^ij e_i f e_j f + h^ab d_a f d_b f."""
    df = frame_gradient(m, f)
    return (np.einsum('ij...,i...,j...->...', m.g_inv, df[:2], df[:2])
            + np.einsum('ab...,a...,b...->...', m.h_inv, df[2:], df[2:]))


def hessian(m: DMetric, f: np.ndarray, c: DConnection) -> np.ndarray:
    """Hess[a, b] = e_a e_b f - Gamma^k_ba e_k f (not symmetrized)."""
    df = frame_gradient(m, f)
    second = np.stack([np.stack([m.frame_derivative(df[b], a) for b in range(4)])
                       for a in range(4)])
    return second - np.einsum('kba...,k...->ab...', c.gamma, df)


def laplacian_hat(m: DMetric, f: np.ndarray, c: Optional[DConnection] = None) -> np.ndarray:
    """Trace of the h- and v-Hessians."""
    c = c if c is not None else canonical_dconnection(m)
    H = hessian(m, f, c)
    return (np.einsum('ij...,ij...->...', m.g_inv, H[:2, :2])
            + np.einsum('ab...,ab...->...', m.h_inv, H[2:, 2:]))


def _block_norm_sq(inv: np.ndarray, A: np.ndarray) -> np.ndarray:
    return np.einsum('ik...,jl...,ij...,kl...->...', inv, inv, A, A)


def _prepare(m: DMetric, connection: Optional[DConnection],
             bundle: Optional[CurvatureBundle]) -> Tuple[DConnection, CurvatureBundle]:
    c = connection if connection is not None else canonical_dconnection(m)
    b = bundle if bundle is not None else curvature(m, c)
    return c, b


def mu_density(f: np.ndarray, tau: float, n: int = N_DIM) -> np.ndarray:
    _check_tau(tau)
    return (4.0 * np.pi * tau) ** (-n) * np.exp(-f)


def F_functional(m: DMetric, f: np.ndarray, connection: Optional[DConnection] = None,
                 bundle: Optional[CurvatureBundle] = None) -> float:
    _, b = _prepare(m, connection, bundle)
    return _integrate(m, (b.scalar + grad_sq(m, f)) * np.exp(-f))


def W_functional(m: DMetric, f: np.ndarray, tau: float, n: int = N_DIM,
                 connection: Optional[DConnection] = None,
                 bundle: Optional[CurvatureBundle] = None) -> float:
    _, b = _prepare(m, connection, bundle)
    mu = mu_density(f, tau, n)
    return _integrate(m, (tau * (b.scalar + grad_sq(m, f)) + f - 2 * n) * mu)


def normalize_f(f: np.ndarray, tau: float, m: DMetric, n: int = N_DIM) -> np.ndarray:
    """Shift f by a constant so that int mu dV = 1."""
    total = _integrate(m, mu_density(f, tau, n))
    if not total > 0:
        raise NumericalError(f"int mu dV = {total} cannot be normalized")
    return f + np.log(total)


def monotonicity_integrand(m: DMetric, f: np.ndarray, connection: Optional[DConnection] = None,
                           bundle: Optional[CurvatureBundle] = None) -> float:
    """2 int (|Ric_h + Hess_h f|^2 + |Ric_v + Hess_v f|^2) exp(-f) dV."""
    c, b = _prepare(m, connection, bundle)
    H = hessian(m, f, c)
    dens = (_block_norm_sq(m.g_inv, b.ricci_h + H[:2, :2])
            + _block_norm_sq(m.h_inv, b.ricci_v + H[2:, 2:]))
    return 2.0 * _integrate(m, dens * np.exp(-f))


def sigma_functional(m: DMetric, f: np.ndarray, tau: float, n: int = N_DIM,
                     connection: Optional[DConnection] = None,
                     bundle: Optional[CurvatureBundle] = None) -> float:
    c, b = _prepare(m, connection, bundle)
    H = hessian(m, f, c)
    dens = (_block_norm_sq(m.g_inv, b.ricci_h + H[:2, :2] - m.g / (2.0 * tau))
            + _block_norm_sq(m.h_inv, b.ricci_v + H[2:, 2:] - m.h / (2.0 * tau)))
    return 2.0 * tau ** 4 * _integrate(m, dens * mu_density(f, tau, n))


def thermodynamics(m: DMetric, f: np.ndarray, tau: float, n: int = N_DIM,
                   connection: Optional[DConnection] = None,
                   bundle: Optional[CurvatureBundle] = None) -> FunctionalReport:
    """Energy, entropy, fluctuation and partition function at (m, f, tau)."""
    _check_tau(tau)
    c, b = _prepare(m, connection, bundle)
    mu = mu_density(f, tau, n)
    core = b.scalar + grad_sq(m, f)
    F = _integrate(m, core * np.exp(-f))
    W = _integrate(m, (tau * core + f - 2 * n) * mu)
    E = -tau ** 2 * _integrate(m, (core - n / tau) * mu)
    Z_log = _integrate(m, (-f + n) * mu)
    S = -W
    sigma = sigma_functional(m, f, tau, n, c, b)
    gap = abs(S - (E / tau + Z_log))
    if gap > 1e-9 * max(1.0, abs(S)):
        logger.warning(f"entropy closure S = E/tau + log Z off by {gap:.3e}")
    return FunctionalReport(F=F, W=W, E=E, S_entropy=S, sigma=sigma, Z_log=Z_log,
                            connection_tag=c.tag, tau=tau, n=n, closure_gap=gap)


def first_variation(m: DMetric, f: np.ndarray, v_h: np.ndarray, v_v: np.ndarray,
                    hf: np.ndarray, vf: np.ndarray,
                    connection: Optional[DConnection] = None) -> float:
    """First variation of F along g -> g + v_h, h -> h + v_v, f -> f + hf + vf.

    int [-v^ij (R_ij + D_i D_j f) - v^ab (R_ab + D_a D_b f)
         + (tr v_h / 2 - hf + tr v_v / 2 - vf) Q] exp(-f) dV,
    Q = 2 Laplace f - |Df|^2 + R + S.
    """
    c, b = _prepare(m, connection, None)
    chart = m.chart
    for name, arr in (('v_h', v_h), ('v_v', v_v)):
        if np.shape(arr)[:2] != (2, 2):
            raise ConfigError(f"{name} needs (2, 2) components")
        chart.check_field(arr, name)
    H = hessian(m, f, c)
    Q = (2.0 * (np.einsum('ij...,ij...->...', m.g_inv, H[:2, :2])
                + np.einsum('ab...,ab...->...', m.h_inv, H[2:, 2:]))
         - grad_sq(m, f) + b.scalar)
    vg = np.einsum('ik...,jl...,kl...->ij...', m.g_inv, m.g_inv, v_h)
    vh = np.einsum('ac...,bd...,cd...->ab...', m.h_inv, m.h_inv, v_v)
    h_part = (-np.einsum('ij...,ij...->...', vg, b.ricci_h + H[:2, :2])
              + (0.5 * np.einsum('ij...,ij...->...', m.g_inv, v_h) - hf) * Q)
    v_part = (-np.einsum('ab...,ab...->...', vh, b.ricci_v + H[2:, 2:])
              + (0.5 * np.einsum('ab...,ab...->...', m.h_inv, v_v) - vf) * Q)
    return _integrate(m, (h_part + v_part) * np.exp(-f))


def compare_connections(m: DMetric, f: np.ndarray, tau: float, n: int = N_DIM,
                        tol: float = NUMERICS_CONFIG['tol_S']) -> Dict:
    """Entropy from the canonical d-connection against the Levi-Civita one."""
    canon = thermodynamics(m, f, tau, n, canonical_dconnection(m))
    lc = thermodynamics(m, f, tau, n, levi_civita(m))
    delta = canon.S_entropy - lc.S_entropy
    if abs(delta) <= tol:
        verdict = 'equivalent'
    else:
        verdict = 'more' if delta > 0 else 'less'
    logger.info(f"entropy canonical {canon.S_entropy:.10g} vs Levi-Civita "
                f"{lc.S_entropy:.10g}: {verdict}")
    return {'S_canonical': canon.S_entropy, 'S_levi_civita': lc.S_entropy,
            'delta': delta, 'verdict': verdict, 'tol': tol}
