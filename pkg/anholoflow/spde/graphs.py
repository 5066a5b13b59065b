"""
Maximal monotone drift graphs with closed-form resolvents.

For a graph Psi and eps > 0 the resolvent J_eps(r) is the unique s with
s + eps Psi(s) containing r, and the Yosida approximation is
Psi_eps(r) = (r - J_eps(r)) / eps. All methods are vectorized over ``r``.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from ..errors import ConfigError

logger = logging.getLogger(__name__)


class MonotoneGraph:
    """Interface shared by all drift graphs."""

    variant = 'graph'

    def bounds(self, r) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper end of the set Psi(r)."""
        raise NotImplementedError

    def selection(self, r) -> np.ndarray:
        """Minimal-norm element of Psi(r)."""
        lo, hi = self.bounds(r)
        return np.clip(0.0, lo, hi)

    def resolvent(self, eps: float, r) -> np.ndarray:
        raise NotImplementedError

    def yosida(self, eps: float, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (r - self.resolvent(eps, r)) / eps

    def yosida_derivative(self, eps: float, r) -> np.ndarray:
        raise NotImplementedError

    def growth(self) -> Tuple[float, float]:
        """(C, a) with sup |Psi(r)| <= C (1 + |r|^a)."""
        raise NotImplementedError

    def centered(self) -> 'MonotoneGraph':
        """Graph shifted by a constant so that 0 lies in Psi(0)."""
        return self

    def to_dict(self) -> Dict:
        raise NotImplementedError


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise ConfigError(f"Yosida parameter must be positive, got {eps}")


@dataclass(frozen=True)
class PiecewiseLinearGraph(MonotoneGraph):
    """Psi(r) = a1 (r - c) + shift below the knee c, [shift, shift + rho] at c,
    shift + rho + a2 (r - c) above it."""

    c: float
    rho: float
    a1: float
    a2: float
    shift: float = 0.0
    variant: str = 'piecewise_linear'

    def __post_init__(self):
        if self.a1 < 0 or self.a2 < 0 or self.rho < 0:
            raise ConfigError(f"{self.variant}: slopes and plateau height must be >= 0")

    def bounds(self, r):
        r = np.asarray(r, dtype=float)
        below = self.a1 * (r - self.c) + self.shift
        above = self.shift + self.rho + self.a2 * (r - self.c)
        lo = np.where(r < self.c, below, np.where(r > self.c, above, self.shift))
        hi = np.where(r < self.c, below, np.where(r > self.c, above, self.shift + self.rho))
        return lo, hi

    def resolvent(self, eps, r):
        _check_eps(eps)
        q = np.asarray(r, dtype=float) - eps * self.shift
        c, rho, a1, a2 = self.c, self.rho, self.a1, self.a2
        low = (q + eps * a1 * c) / (1.0 + eps * a1)
        high = (q + eps * a2 * c - eps * rho) / (1.0 + eps * a2)
        return np.where(q < c, low, np.where(q > c + eps * rho, high, c))

    def yosida_derivative(self, eps, r):
        _check_eps(eps)
        q = np.asarray(r, dtype=float) - eps * self.shift
        return np.where(q < self.c, self.a1 / (1.0 + eps * self.a1),
                        np.where(q > self.c + eps * self.rho,
                                 self.a2 / (1.0 + eps * self.a2), 1.0 / eps))

    def growth(self):
        slope = max(self.a1, self.a2)
        return max(slope, slope * abs(self.c) + self.rho + abs(self.shift)), 1.0

    def centered(self):
        lo, hi = self.bounds(0.0)
        if lo <= 0.0 <= hi:
            return self
        return replace(self, shift=self.shift - float(self.selection(0.0)))

    def to_dict(self):
        return {'variant': self.variant, 'c': self.c, 'rho': self.rho,
                'a1': self.a1, 'a2': self.a2, 'shift': self.shift}


def stefan(chi0: float, rho: float, alpha1: float, alpha2: float) -> PiecewiseLinearGraph:
    """Two-phase Stefan graph with latent-heat plateau [0, rho] at the knee chi0."""
    if alpha1 <= 0 or alpha2 <= 0 or rho < 0:
        raise ConfigError("Stefan graph needs alpha1, alpha2 > 0 and rho >= 0")
    return PiecewiseLinearGraph(c=chi0, rho=rho, a1=alpha1, a2=alpha2, variant='stefan')


def heaviside_soc(kappa: float, c_u: float) -> PiecewiseLinearGraph:
    """kappa (r - c_u) below the critical value c_u, (1 + kappa)(r - c_u) above it.

    Its centred form is kappa r + (r - c_u) H(r - c_u).
    """
    if kappa <= 0:
        raise ConfigError("HeavisideSOC graph needs kappa > 0")
    return PiecewiseLinearGraph(c=c_u, rho=0.0, a1=kappa, a2=1.0 + kappa, variant='heaviside_soc')


@dataclass(frozen=True)
class LinearGraph(MonotoneGraph):
    """Psi(r) = a r; a = 0 gives the zero graph."""

    a: float = 1.0
    variant: str = 'linear'

    def __post_init__(self):
        if self.a < 0:
            raise ConfigError("Linear graph needs a >= 0")

    def bounds(self, r):
        v = self.a * np.asarray(r, dtype=float)
        return v, v

    def resolvent(self, eps, r):
        _check_eps(eps)
        return np.asarray(r, dtype=float) / (1.0 + eps * self.a)

    def yosida_derivative(self, eps, r):
        _check_eps(eps)
        return np.full(np.shape(r), self.a / (1.0 + eps * self.a))

    def growth(self):
        return self.a, 1.0

    def to_dict(self):
        return {'variant': self.variant, 'a': self.a}


@dataclass(frozen=True)
class SignPowerGraph(MonotoneGraph):
    """Psi(r) = rho |r|^alpha sign(r); alpha = 0 is the sign graph with Psi(0) = [-rho, rho]."""

    rho: float
    alpha: float
    variant: str = 'sign_power'
    bisection_steps: int = 80

    def __post_init__(self):
        if self.rho <= 0 or not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("SignPower graph needs rho > 0 and alpha in [0, 1]")

    def bounds(self, r):
        r = np.asarray(r, dtype=float)
        v = self.rho * np.abs(r) ** self.alpha * np.sign(r)
        if self.alpha == 0.0:
            lo = np.where(r == 0, -self.rho, v)
            hi = np.where(r == 0, self.rho, v)
            return lo, hi
        return v, v

    def resolvent(self, eps, r):
        _check_eps(eps)
        r = np.asarray(r, dtype=float)
        a, k = np.abs(r), eps * self.rho
        if self.alpha == 0.0:
            return np.sign(r) * np.maximum(a - k, 0.0)
        if self.alpha == 1.0:
            return r / (1.0 + k)
        # x + k x^alpha = |r| on [0, |r|]
        lo, hi = np.zeros_like(a), a.copy()
        for _ in range(self.bisection_steps):
            mid = 0.5 * (lo + hi)
            too_big = mid + k * mid ** self.alpha > a
            hi = np.where(too_big, mid, hi)
            lo = np.where(too_big, lo, mid)
        x = 0.5 * (lo + hi)
        pos = x > 0
        for _ in range(2):
            xs = np.where(pos, x, 1.0)
            f = xs + k * xs ** self.alpha - a
            df = 1.0 + k * self.alpha * xs ** (self.alpha - 1.0)
            x = np.where(pos, np.clip(xs - f / df, lo, hi), x)
        return np.sign(r) * x

    def yosida_derivative(self, eps, r):
        _check_eps(eps)
        s = np.abs(self.resolvent(eps, r))
        if self.alpha == 0.0:
            return np.where(s == 0.0, 1.0 / eps, 0.0)
        ra = self.rho * self.alpha
        with np.errstate(divide='ignore'):
            return ra / (s ** (1.0 - self.alpha) + eps * ra)

    def growth(self):
        return self.rho, self.alpha

    def to_dict(self):
        return {'variant': self.variant, 'rho': self.rho, 'alpha': self.alpha}


def graph_from_config(block: Dict) -> MonotoneGraph:
    """Build a graph from a config block ``{'variant': ..., parameters...}``."""
    params = dict(block)
    variant = params.pop('variant', None)
    try:
        if variant == 'stefan':
            return stefan(float(params['chi0']), float(params['rho']),
                          float(params['alpha1']), float(params['alpha2']))
        if variant == 'sign_power':
            return SignPowerGraph(rho=float(params['rho']), alpha=float(params['alpha']))
        if variant == 'heaviside_soc':
            return heaviside_soc(float(params['kappa']), float(params['c_u']))
        if variant == 'linear':
            return LinearGraph(a=float(params.get('a', 1.0)))
    except KeyError as e:
        raise ConfigError(f"Graph '{variant}' is missing parameter {e}") from e
    raise ConfigError(f"Unknown graph variant '{variant}'")
