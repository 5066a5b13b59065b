"""
Multiplicative noise sigma(U) dW = sum_k nu_k (U - offset) <l, e_k> e_k d beta_k.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..config import SPDE_CONFIG
from ..errors import ConfigError
from ..expressions import compile_expression
from .domain import Eigenpairs, SPDEDomain

logger = logging.getLogger(__name__)


@dataclass
class NoiseSpec:
    """Truncated noise on the first K Dirichlet eigenpairs."""

    nu: np.ndarray
    pairs: Eigenpairs
    l: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        self.nu = np.asarray(self.nu, dtype=float)
        if self.nu.shape != self.pairs.values.shape:
            raise ConfigError(f"nu has {self.nu.size} entries for {self.pairs.values.size} modes")
        if np.any(self.nu < 0) or not np.all(np.isfinite(self.nu)):
            raise ConfigError("nu_k must be finite and non-negative")
        rates = self.nu * self.pairs.values
        if np.any(np.diff(rates) > 1e-12 * max(1.0, float(rates.max()))):
            raise ConfigError("nu_k * lambda_k must be non-increasing in k",
                              details={'nu_lambda': rates.tolist()})

    @property
    def K(self) -> int:
        return int(self.nu.size)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.pairs.values

    def projections(self, domain: SPDEDomain) -> np.ndarray:
        """<l, e_k> in the mass-weighted inner product."""
        return self.pairs.vectors.T @ (domain.mass * self.l)

    def trace_sum(self) -> float:
        """Truncated sum nu_k^2 lambda_k^2."""
        return float(np.sum((self.nu * self.pairs.values) ** 2))

    def is_zero(self) -> bool:
        return not np.any(self.nu)

    def to_dict(self) -> Dict:
        return {'K': self.K, 'nu': self.nu.tolist(), 'lambda': self.pairs.values.tolist(),
                'offset': self.offset, 'sum_nu2_lambda2': self.trace_sum()}


def noise_from_config(domain: SPDEDomain, pairs: Eigenpairs,
                      block: Optional[Dict] = None) -> NoiseSpec:
    """nu rule 'power' (scale * lambda_k^power), 'constant' or 'list'; l defaults to e_1."""
    cfg = {**SPDE_CONFIG['noise'], **(block or {})}
    lam = pairs.values
    rule = cfg['nu_rule']
    if rule == 'power':
        nu = float(cfg['nu_scale']) * lam ** float(cfg['nu_power'])
    elif rule == 'constant':
        nu = np.full(lam.shape, float(cfg['nu_scale']))
    elif rule == 'list':
        nu = float(cfg['nu_scale']) * np.asarray(cfg['nu'], dtype=float)[:lam.size]
    else:
        raise ConfigError(f"Unknown nu rule '{rule}'")
    if cfg.get('l') is None:
        l = pairs.vectors[:, 0].copy()
    else:
        coords = domain.coordinates()
        expr = compile_expression(cfg['l'], allowed=tuple(coords))
        l = domain.to_interior(expr.evaluate(**coords) * np.ones(domain.shape))
    noise = NoiseSpec(nu=nu, pairs=pairs, l=l, offset=float(cfg.get('offset', 0.0)))
    logger.info(f"noise: K={noise.K}, sum nu^2 lambda^2 = {noise.trace_sum():.6g}")
    return noise


def draw_increments(rng: np.random.Generator, K: int, dchi: float, steps: int = 1) -> np.ndarray:
    """Brownian increments d beta_k, shape (steps, K), variance dchi."""
    return np.sqrt(dchi) * rng.standard_normal((steps, K))


def refine_increments(dbeta: np.ndarray, dchi: float, rng: np.random.Generator) -> np.ndarray:
    """Brownian-bridge refinement: each increment over dchi splits into two over dchi/2."""
    dbeta = np.atleast_2d(dbeta)
    z = rng.standard_normal(dbeta.shape)
    first = 0.5 * dbeta + 0.5 * np.sqrt(dchi) * z
    second = dbeta - first
    fine = np.empty((2 * dbeta.shape[0],) + dbeta.shape[1:])
    fine[0::2] = first
    fine[1::2] = second
    return fine


def sample_noise(ns: NoiseSpec, domain: SPDEDomain, U: np.ndarray, dchi: float,
                 rng: Optional[np.random.Generator] = None,
                 dbeta: Optional[np.ndarray] = None) -> np.ndarray:
    """Noise increment on interior nodes; uses ``dbeta`` when given, else draws from ``rng``."""
    if dchi <= 0:
        raise ConfigError(f"dchi must be positive, got {dchi}")
    if dbeta is None:
        if rng is None:
            raise ConfigError("sample_noise needs an rng or explicit increments")
        dbeta = draw_increments(rng, ns.K, dchi)[0]
    if ns.is_zero():
        return np.zeros_like(U)
    weights = ns.nu * ns.projections(domain) * np.asarray(dbeta)
    return (U - ns.offset) * (ns.pairs.vectors @ weights)
