"""
Implicit Yosida stepper for the stochastic porous-media equation

    dU - Laplace_g Psi(U) dchi  contains  sigma(U) dW,   Psi(U) = 0 on the boundary,

and the per-path / ensemble drivers.

Each step solves M V + dchi K Psi_eps(V) = M b with b = U + noise by damped
Newton, where K and M are the stiffness and lumped mass of the domain.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ..config import NUMERICS_CONFIG, SPDE_CONFIG
from ..ensemble import PathResult, path_rng, run_paths
from ..errors import ConfigError, ConvergenceError
from ..expressions import compile_expression
from .domain import SPDEDomain, eigensolve_laplacian
from .graphs import MonotoneGraph, graph_from_config
from .noise import NoiseSpec, draw_increments, noise_from_config, sample_noise

logger = logging.getLogger(__name__)

RNG_TAG = 'spde.noise'


@dataclass
class SPDEState:
    """Interior field U at flow parameter chi."""

    U: np.ndarray
    chi: float = 0.0
    path: int = 0
    eps: float = SPDE_CONFIG['eps_min']
    newton_iterations: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.U)):
            raise ConvergenceError(f"path {self.path}: U is not finite at chi={self.chi:g}")


@dataclass
class TrajectoryRecord:
    """Per-step diagnostics of one path."""

    path: int
    chi: List[float] = field(default_factory=list)
    l2: List[float] = field(default_factory=list)
    u_min: List[float] = field(default_factory=list)
    u_max: List[float] = field(default_factory=list)
    m: List[float] = field(default_factory=list)
    positivity_ok: bool = True
    converged: bool = True
    failed: bool = False
    error: Optional[str] = None
    final_U: Optional[np.ndarray] = field(default=None, repr=False)

    def append(self, state: SPDEState, domain: SPDEDomain, threshold: float) -> None:
        U = state.U
        self.chi.append(float(state.chi))
        self.l2.append(float(np.sqrt(np.sum(domain.mass * U ** 2))))
        self.u_min.append(float(U.min()) if U.size else 0.0)
        self.u_max.append(float(U.max()) if U.size else 0.0)
        self.m.append(float(np.sum(domain.mass[U > threshold])))

    def rows(self) -> List[Dict[str, float]]:
        return [{'chi': c, 'l2': l2, 'min': lo, 'max': hi, 'm': m}
                for c, l2, lo, hi, m in zip(self.chi, self.l2, self.u_min, self.u_max, self.m)]

    def to_dict(self) -> Dict:
        return {'path': self.path, 'positivity_ok': self.positivity_ok,
                'converged': self.converged, 'failed': self.failed, 'error': self.error,
                'steps': len(self.chi) - 1}


@dataclass
class SPDESetup:
    """Everything a path needs; eigenpairs are computed once and shared."""

    domain: SPDEDomain
    graph: MonotoneGraph
    noise: NoiseSpec
    U0: np.ndarray
    dchi: float
    steps: int
    seed: int = 0
    eps_min: float = SPDE_CONFIG['eps_min']
    eps_coeff: float = SPDE_CONFIG['eps_coeff']
    threshold: float = 0.0
    positivity_tol: float = SPDE_CONFIG['positivity_tol']
    newton_tol: float = NUMERICS_CONFIG['newton_tol']
    newton_max_iter: int = NUMERICS_CONFIG['newton_max_iter']
    newton_max_halvings: int = NUMERICS_CONFIG['newton_max_halvings']

    def __post_init__(self):
        if self.dchi <= 0 or self.steps < 0:
            raise ConfigError("dchi must be positive and steps non-negative")

    @property
    def eps(self) -> float:
        return max(self.eps_min, self.eps_coeff * self.dchi)

    def with_step(self, dchi: float, steps: int) -> 'SPDESetup':
        return SPDESetup(**{**self.__dict__, 'dchi': dchi, 'steps': steps})

    @classmethod
    def from_config(cls, block: Optional[Dict] = None, seed: int = 0) -> 'SPDESetup':
        cfg = {**SPDE_CONFIG, **(block or {})}
        domain = SPDEDomain.from_config(cfg['domain'])
        graph = graph_from_config(cfg['graph'])
        noise_cfg = {**SPDE_CONFIG['noise'], **cfg.get('noise', {})}
        pairs = eigensolve_laplacian(domain, noise_cfg['modes'],
                                     cfg['dense_eigen_limit'], cfg['eigen_tol'])
        noise = noise_from_config(domain, pairs, noise_cfg)
        coords = domain.coordinates()
        expr = compile_expression(cfg['initial'], allowed=tuple(coords))
        U0 = domain.to_interior(expr.evaluate(**coords) * np.ones(domain.shape))
        threshold = cfg.get('threshold')
        if threshold is None:
            threshold = float(getattr(graph, 'c', 0.0))
        return cls(domain=domain, graph=graph, noise=noise, U0=U0, dchi=float(cfg['dchi']),
                   steps=int(cfg['steps']), seed=int(seed), eps_min=float(cfg['eps_min']),
                   eps_coeff=float(cfg['eps_coeff']), threshold=float(threshold),
                   positivity_tol=float(cfg['positivity_tol']))


def step(state: SPDEState, dchi: float, graph: MonotoneGraph, ns: NoiseSpec,
         domain: SPDEDomain, eps: float, rng: Optional[np.random.Generator] = None,
         dbeta: Optional[np.ndarray] = None, tol: float = NUMERICS_CONFIG['newton_tol'],
         max_iter: int = NUMERICS_CONFIG['newton_max_iter'],
         max_halvings: int = NUMERICS_CONFIG['newton_max_halvings']) -> SPDEState:
    """One implicit step with explicit (Euler-Maruyama) noise."""
    if dchi <= 0 or eps <= 0:
        raise ConfigError("dchi and eps must be positive")
    psi = graph.centered()
    K, mass = domain.stiffness, domain.mass
    b = state.U + sample_noise(ns, domain, state.U, dchi, rng=rng, dbeta=dbeta)
    rhs = mass * b

    def residual(V):
        return mass * V + dchi * (K @ psi.yosida(eps, V)) - rhs

    V = b.copy()
    F = residual(V)
    scale = max(float(np.max(np.abs(rhs))) if rhs.size else 0.0, float(mass.max()))
    norm = float(np.max(np.abs(F))) if F.size else 0.0
    it = 0
    while norm > tol * scale:
        if it >= max_iter:
            raise ConvergenceError(
                f"Newton did not converge at chi={state.chi + dchi:g} (residual {norm:.3e})",
                details={'path': state.path, 'chi': state.chi + dchi, 'residual': norm,
                         'iterations': it})
        J = sp.diags(mass) + dchi * (K @ sp.diags(psi.yosida_derivative(eps, V)))
        delta = spsolve(J.tocsc(), -F)
        alpha = 1.0
        for _ in range(max_halvings):
            trial = V + alpha * delta
            F_trial = residual(trial)
            trial_norm = float(np.max(np.abs(F_trial)))
            if trial_norm <= (1.0 - 1e-4 * alpha) * norm:
                break
            alpha *= 0.5
        V, F, norm = trial, F_trial, trial_norm
        it += 1
    return SPDEState(U=V, chi=state.chi + dchi, path=state.path, eps=eps, newton_iterations=it)


def run_path(setup: SPDESetup, index: int = 0,
             increments: Optional[np.ndarray] = None) -> TrajectoryRecord:
    """Integrate one path; ``increments`` (steps, K) overrides the path's own stream."""
    if increments is None:
        rng = path_rng(setup.seed, RNG_TAG, index)
        increments = draw_increments(rng, setup.noise.K, setup.dchi, setup.steps)
    if increments.shape[0] != setup.steps:
        raise ConfigError(f"{increments.shape[0]} increments for {setup.steps} steps")
    state = SPDEState(U=setup.U0.copy(), chi=0.0, path=index, eps=setup.eps)
    record = TrajectoryRecord(path=index)
    record.append(state, setup.domain, setup.threshold)
    for n in range(setup.steps):
        state = step(state, setup.dchi, setup.graph, setup.noise, setup.domain, setup.eps,
                     dbeta=increments[n], tol=setup.newton_tol,
                     max_iter=setup.newton_max_iter, max_halvings=setup.newton_max_halvings)
        record.append(state, setup.domain, setup.threshold)
    record.final_U = state.U
    if bool(np.all(setup.U0 >= 0)):
        record.positivity_ok = min(record.u_min) >= -setup.positivity_tol
    logger.debug(f"path {index}: min U {min(record.u_min):.3e}, final m {record.m[-1]:.4g}")
    return record


def run(setup: SPDESetup) -> TrajectoryRecord:
    return run_path(setup, 0)


def _path_worker(index: int, setup: SPDESetup) -> TrajectoryRecord:
    return run_path(setup, index)


@dataclass
class EnsembleResult:
    records: List[TrajectoryRecord]
    failures: List[PathResult]

    @property
    def ok_records(self) -> List[TrajectoryRecord]:
        return [r for r in self.records if not r.failed]

    def summary(self) -> Dict:
        ok = self.ok_records
        out = {'paths': len(self.records), 'failed': len(self.failures),
               'positivity': bool(all(r.positivity_ok for r in ok)) if ok else None}
        if ok:
            for key in ('l2', 'u_min', 'u_max', 'm'):
                arr = np.array([getattr(r, key) for r in ok])
                out[key] = {'mean': arr.mean(axis=0).tolist(),
                            'q05': np.quantile(arr, 0.05, axis=0).tolist(),
                            'q95': np.quantile(arr, 0.95, axis=0).tolist()}
            out['global_min'] = float(min(min(r.u_min) for r in ok))
            out['chi'] = list(ok[0].chi)
        return out


def ensemble_run(setup: SPDESetup, paths: int, backend: str = 'serial',
                 num_workers: Optional[int] = None) -> EnsembleResult:
    """Run ``paths`` independent paths; failed paths are recorded, not raised."""
    results = run_paths(_path_worker, paths, {'setup': setup}, backend, num_workers)
    records, failures = [], []
    for res in results:
        if res.failed:
            failures.append(res)
            records.append(TrajectoryRecord(path=res.index, failed=True, converged=False,
                                            positivity_ok=False, error=res.error))
        else:
            records.append(res.value)
    return EnsembleResult(records=records, failures=failures)
