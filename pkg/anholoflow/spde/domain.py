"""
SPDE domains, the Dirichlet Laplace-Beltrami operator and its eigenpairs.

The operator -Laplace_g is assembled in flux form: K is the symmetric stiffness
sum_i D_i^T diag(w_i) D_i over cell faces and M = diag(sqrt|g| * cell volume)
is the lumped mass, so -Laplace_g u ~ M^{-1} K u on interior nodes.
"""

import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from ..config import SPDE_CONFIG
from ..errors import ConfigError, ConvergenceError, NonEllipticError
from ..expressions import compile_expression
from ..geometry import Axis, DMetric

logger = logging.getLogger(__name__)


@dataclass
class SPDEDomain:
    """A 1- to 3-dimensional Dirichlet box with a diagonal metric diag(a_1, ..., a_d)."""

    axes: Tuple[Axis, ...]
    metric_diag: np.ndarray               # (d,) + shape
    signature: str = 'riemannian'
    stiffness: sp.csr_matrix = field(init=False, repr=False)
    mass: np.ndarray = field(init=False, repr=False)
    interior: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.axes = tuple(self.axes)
        if not 1 <= len(self.axes) <= 3:
            raise ConfigError(f"SPDE domains have 1 to 3 axes, got {len(self.axes)}")
        if any(a.periodic for a in self.axes):
            raise ConfigError("SPDE domains carry Dirichlet boundaries on every axis")
        if self.signature != 'riemannian':
            raise NonEllipticError("Laplace-Beltrami on a Lorentz-flagged metric is not elliptic")
        diag = np.asarray(self.metric_diag, dtype=float)
        if diag.shape != (self.dim,) + self.shape:
            raise ConfigError(f"metric has shape {diag.shape}, expected {(self.dim,) + self.shape}")
        if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
            raise NonEllipticError("SPDE metric must be positive definite")
        self.metric_diag = diag
        self._assemble()

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def coordinates(self) -> Dict[str, np.ndarray]:
        grids = np.meshgrid(*(a.points for a in self.axes), indexing='ij')
        return {a.name: g for a, g in zip(self.axes, grids)}

    def sqrt_det(self) -> np.ndarray:
        return np.sqrt(np.prod(self.metric_diag, axis=0))

    def cell_volume(self) -> float:
        return float(np.prod([a.spacing for a in self.axes]))

    def _assemble(self) -> None:
        ident = [sp.identity(a.count, format='csr') for a in self.axes]
        sqrt_g = self.sqrt_det().ravel()
        cell = self.cell_volume()
        K = sp.csr_matrix((int(np.prod(self.shape)),) * 2)
        for i, ax in enumerate(self.axes):
            n = ax.count
            diff = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / ax.spacing
            avg = sp.diags([0.5 * np.ones(n - 1), 0.5 * np.ones(n - 1)], [0, 1], shape=(n - 1, n))
            D = reduce(lambda A, B: sp.kron(A, B, format='csr'),
                       [diff if k == i else ident[k] for k in range(self.dim)])
            A = reduce(lambda P, Q: sp.kron(P, Q, format='csr'),
                       [avg if k == i else ident[k] for k in range(self.dim)])
            coef = sqrt_g / self.metric_diag[i].ravel()          # sqrt|g| g^ii
            K = K + D.T @ sp.diags(cell * (A @ coef)) @ D
        mask = np.ones(self.shape, dtype=bool)
        for k in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[k] = 0
            mask[tuple(sl)] = False
            sl[k] = -1
            mask[tuple(sl)] = False
        self.interior = mask.ravel()
        self.stiffness = K[self.interior][:, self.interior].tocsr()
        self.mass = sqrt_g[self.interior] * cell

    def to_full(self, u: np.ndarray) -> np.ndarray:
        """Interior vector -> full node field (zero Dirichlet values)."""
        full = np.zeros(int(np.prod(self.shape)))
        full[self.interior] = u
        return full.reshape(self.shape)

    def to_interior(self, field_: np.ndarray) -> np.ndarray:
        return np.asarray(field_, dtype=float).ravel()[self.interior]

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.mass * u * v))

    def volume(self) -> float:
        return float(np.sum(self.mass))

    @classmethod
    def from_config(cls, block: Optional[Dict] = None) -> 'SPDEDomain':
        cfg = {**SPDE_CONFIG['domain'], **(block or {})}
        axes = tuple(Axis(str(a['name']), float(a['min']), float(a['max']), int(a['count']),
                          'dirichlet') for a in cfg['axes'])
        names = tuple(a.name for a in axes)
        grids = np.meshgrid(*(a.points for a in axes), indexing='ij')
        psi = compile_expression(cfg.get('psi', '0'), allowed=names)
        conformal = np.exp(psi.evaluate(**dict(zip(names, grids))) * np.ones(grids[0].shape))
        diag = np.stack([conformal] * len(axes))
        return cls(axes, diag, cfg.get('signature', 'riemannian'))

    @classmethod
    def from_dmetric(cls, m: DMetric, y_index: Tuple[int, int] = (0, 0)) -> 'SPDEDomain':
        """(x1, x2) h-chart of a d-metric at a fixed vertical node."""
        if m.signature != 'riemannian':
            raise NonEllipticError("Laplace-Beltrami on a Lorentz-flagged metric is not elliptic")
        j, k = y_index
        g = m.g[:, :, :, :, j, k]
        if np.any(g[0, 1] != 0):
            raise ConfigError("SPDE domains need a diagonal h-block")
        return cls(m.chart.axes[:2], np.stack([g[0, 0], g[1, 1]]), 'riemannian')


@dataclass
class Eigenpairs:
    """Ascending eigenvalues and M-orthonormal eigenvectors (columns) on interior nodes."""

    values: np.ndarray
    vectors: np.ndarray
    residual: float
    orthonormality: float


def eigensolve_laplacian(domain: SPDEDomain, k: int = SPDE_CONFIG['noise']['modes'],
                         dense_limit: int = SPDE_CONFIG['dense_eigen_limit'],
                         tol: float = SPDE_CONFIG['eigen_tol']) -> Eigenpairs:
    """Lowest ``k`` Dirichlet eigenpairs of K e = lambda M e."""
    n = domain.n_interior
    k = min(int(k), n)
    if k < 1:
        raise ConfigError("Need at least one eigenpair")
    K, mvec = domain.stiffness, domain.mass
    M = sp.diags(mvec)
    if n <= dense_limit:
        values, vectors = scipy.linalg.eigh(K.toarray(), np.diag(mvec), subset_by_index=[0, k - 1])
    else:
        lu = splu(K.tocsc())
        op_inv = LinearOperator(matvec=lu.solve, shape=K.shape, dtype=K.dtype)
        try:
            values, vectors = eigsh(K, k, M, sigma=0.0, OPinv=op_inv)
        except Exception as e:
            raise ConvergenceError(f"Lanczos eigen-solve failed: {e}") from e
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
    # M-orthonormalize through the Cholesky factor of the Gram matrix
    gram = vectors.T @ (mvec[:, None] * vectors)
    L = np.linalg.cholesky(gram)
    vectors = scipy.linalg.solve_triangular(L, vectors.T, lower=True).T
    for j in range(k):
        pivot = np.argmax(np.abs(vectors[:, j]))
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]

    Me = mvec[:, None] * vectors
    res = np.max(np.abs(K @ vectors - Me * values[None, :]), axis=0)
    rel = float(np.max(res / (values * np.max(np.abs(Me), axis=0))))
    ortho = float(np.max(np.abs(vectors.T @ Me - np.eye(k))))
    if not np.all(values > 0):
        raise ConvergenceError("Dirichlet eigenvalues must be positive")
    if rel > tol or ortho > tol:
        raise ConvergenceError(f"eigenpairs not accurate enough (residual {rel:.3e}, "
                               f"orthonormality {ortho:.3e})",
                               details={'residual': rel, 'orthonormality': ortho})
    logger.debug(f"{k} eigenpairs on {n} nodes: lambda_1 = {values[0]:.6g}, residual {rel:.2e}")
    return Eigenpairs(values=values, vectors=vectors, residual=rel, orthonormality=ortho)


def laplace_beltrami(domain: SPDEDomain, u: np.ndarray) -> np.ndarray:
    """Delta_g u on interior nodes (u given on interior nodes, zero on the boundary)."""
    return -(domain.stiffness @ u) / domain.mass

