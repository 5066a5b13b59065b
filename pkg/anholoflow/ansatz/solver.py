"""
Anholonomic deformation of the ansatz: psi, h3, h4, w_i, n_i from a generating
function phi and the source constant lambda, plus back-substitution residuals.

Closed forms used here (obtained by eliminating h3 between the phi-definition
and the h4* equation and integrating in t):

    h4 = 0h4 + exp(2 phi) / (4 lambda)
    h3 = (phi*)^2 exp(2 phi) / (4 lambda^2 h4)
    w_i = -d_i phi / phi*
    n_i = 1n_i + 2n_i * int_{t_min}^t h3 / |h4|^(3/2) dt

``residual_system`` re-checks all of them on the grid.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import cg, spsolve

from ..config import NUMERICS_CONFIG
from ..errors import ChartMismatchError, ConfigError, ConvergenceError, DegenerateMetricError
from ..geometry import GridChart, einstein_residual, interior_max, lc_constraint_residual
from .data import AnsatzMetric, GeneratingData, check_phi_star, phi_star

logger = logging.getLogger(__name__)


def _second_difference(axis) -> sp.csr_matrix:
    n, h = axis.count, axis.spacing
    D2 = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format='lil')
    if axis.periodic:
        D2[0, n - 1] = 1.0
        D2[n - 1, 0] = 1.0
    return (D2 / h ** 2).tocsr()


def laplacian_5pt(chart: GridChart) -> sp.csr_matrix:
    """5-point Laplacian on the (x1, x2) plane, C-order over (x1, x2)."""
    a1, a2 = chart.axes[0], chart.axes[1]
    return (sp.kron(_second_difference(a1), sp.identity(a2.count))
            + sp.kron(sp.identity(a1.count), _second_difference(a2))).tocsr()


def _plane_interior(chart: GridChart) -> np.ndarray:
    mask = np.ones(chart.shape[:2], dtype=bool)
    for k in (0, 1):
        if not chart.axes[k].periodic:
            sl = [slice(None)] * 2
            sl[k] = 0
            mask[tuple(sl)] = False
            sl[k] = -1
            mask[tuple(sl)] = False
    return mask.ravel()


def laplace_residual(psi_plane: np.ndarray, chart: GridChart) -> float:
    """Max 5-point residual over the unknown (interior) nodes of the plane."""
    r = laplacian_5pt(chart) @ psi_plane.ravel()
    return float(np.max(np.abs(r[_plane_interior(chart)])))


def solve_psi(boundary: np.ndarray, chart: GridChart,
              tol: float = NUMERICS_CONFIG['tol_lap'],
              max_iter: int = NUMERICS_CONFIG['lap_max_iter']) -> np.ndarray:
    """Harmonic psi(x1, x2) with the given Dirichlet data, broadcast over (t, y4).

    ``boundary`` is a field on the chart (or the (x1, x2) plane); only its
    values on the plane boundary are used.
    """
    b = np.asarray(boundary, dtype=float)
    plane = b[:, :, 0, 0] if b.ndim == 4 else b
    if plane.shape != chart.shape[:2]:
        raise ChartMismatchError(f"psi boundary data has shape {plane.shape}")
    if not np.all(np.isfinite(plane)):
        raise ConfigError("psi boundary data is not finite")
    interior = _plane_interior(chart)
    if interior.all():
        raise ConfigError("psi needs at least one Dirichlet axis among x1, x2")
    A = laplacian_5pt(chart)
    A_ii = A[interior][:, interior].tocsc()
    A_ib = A[interior][:, ~interior]
    x_b = plane.ravel()[~interior]
    rhs = -(A_ib @ x_b)

    x_i = spsolve(A_ii, rhs)
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    res = float(np.max(np.abs(A_ii @ x_i - rhs)))
    if res > tol * scale:
        logger.debug(f"direct Laplace residual {res:.3e}; refining with CG")
        # -A_ii is symmetric positive definite
        x_i, info = cg(-A_ii, -rhs, x0=x_i, atol=tol * scale, maxiter=max_iter)
        res = float(np.max(np.abs(A_ii @ x_i - rhs)))
        if info != 0 or res > tol * scale:
            raise ConvergenceError(f"Laplace solve for psi did not reach {tol:g} "
                                   f"(residual {res:.3e}, info {info})",
                                   details={'residual': res, 'iterations': max_iter})
    psi = plane.ravel().copy()
    psi[interior] = x_i
    psi = psi.reshape(chart.shape[:2])
    return np.broadcast_to(psi[:, :, None, None], chart.shape).copy()


def build_h4(phi: np.ndarray, lam: float, h4_0: np.ndarray,
             delta_nd: float = NUMERICS_CONFIG['delta_nd']) -> np.ndarray:
    """h4 = 0h4 + exp(2 phi)/(4 lambda); refuses a vanishing h4."""
    if lam == 0.0:
        raise ConfigError("lambda must be nonzero")
    h4 = h4_0 + np.exp(2.0 * phi) / (4.0 * lam)
    if not np.all(np.isfinite(h4)):
        raise DegenerateMetricError("h4 is not finite on the chart")
    if np.min(h4) * np.max(h4) <= 0 or np.min(np.abs(h4)) < delta_nd:
        raise DegenerateMetricError(
            f"h4 vanishes on the chart (range [{np.min(h4):.3e}, {np.max(h4):.3e}])",
            details={'h4_min': float(np.min(h4)), 'h4_max': float(np.max(h4))})
    return h4


def build_h3(phi: np.ndarray, lam: float, h4: np.ndarray, chart: GridChart,
             eps_phi: float = NUMERICS_CONFIG['eps_phi']) -> np.ndarray:
    """h3 = (phi*)^2 exp(2 phi) / (4 lambda^2 h4)."""
    ps = check_phi_star(phi, chart, eps_phi)
    return ps ** 2 * np.exp(2.0 * phi) / (4.0 * lam ** 2 * h4)


def build_w(phi: np.ndarray, chart: GridChart,
            eps_phi: float = NUMERICS_CONFIG['eps_phi']) -> np.ndarray:
    """w_i = -d_i phi / phi*."""
    ps = check_phi_star(phi, chart, eps_phi)
    return np.stack([-chart.derivative(phi, i) / ps for i in (0, 1)])


def build_n(h3: np.ndarray, h4: np.ndarray, n1: np.ndarray, n2: np.ndarray,
            chart: GridChart) -> np.ndarray:
    """n_i = 1n_i + 2n_i * cumulative trapezoid of h3/|h4|^(3/2) from t_min."""
    integrand = h3 / np.abs(h4) ** 1.5
    integral = cumulative_trapezoid(integrand, dx=chart.axes[2].spacing, axis=2, initial=0.0)
    if not np.all(np.isfinite(integral)):
        raise DegenerateMetricError("n-quadrature is not finite")
    return np.asarray(n1) + np.asarray(n2) * integral[None]


def assemble(psi: np.ndarray, h3: np.ndarray, h4: np.ndarray, w: np.ndarray, n: np.ndarray,
             chart: GridChart, signs=(1.0, 1.0), chi: float = 0.0) -> AnsatzMetric:
    return AnsatzMetric(psi=psi, h3=h3, h4=h4, w=w, n=n, chart=chart,
                        signs=tuple(signs), chi=chi)


def generate(data: GeneratingData, index: int = 0) -> AnsatzMetric:
    """Ansatz metric for the phi sample ``index``."""
    chart = data.chart
    phi = data.phi[index]
    psi = solve_psi(data.psi_boundary, chart)
    h4 = build_h4(phi, data.lam, data.h4_0)
    h3 = build_h3(phi, data.lam, h4, chart, data.eps_phi)
    w = build_w(phi, chart, data.eps_phi)
    n = build_n(h3, h4, data.n1, data.n2, chart)
    logger.debug(f"ansatz sample {index} (chi={data.chi[index]:g}): "
                 f"h3 in [{h3.min():.3g}, {h3.max():.3g}], h4 in [{h4.min():.3g}, {h4.max():.3g}]")
    return assemble(psi, h3, h4, w, n, chart, data.signs, data.chi[index])


def generate_family(data: GeneratingData) -> List[AnsatzMetric]:
    return [generate(data, m) for m in range(len(data.chi))]


@dataclass
class AnsatzResiduals:
    """Max-norms of the defining system of one ansatz metric."""

    eq1: float
    eq2: Optional[float]
    eq3: float
    eq4: float
    auxphi: float
    ep2a: float
    lc: Dict[str, float]
    einstein: Optional[Dict] = field(default=None)

    @property
    def max_system(self) -> float:
        values = [self.eq1, self.eq3, self.eq4, self.auxphi, self.ep2a]
        if self.eq2 is not None:
            values.append(self.eq2)
        return max(values)

    def to_dict(self) -> Dict:
        return {
            'eq1': self.eq1, 'eq2': self.eq2, 'eq3': self.eq3, 'eq4': self.eq4,
            'auxphi': self.auxphi, 'ep2a': self.ep2a,
            'lc': dict(self.lc),
            'einstein': self.einstein,
            'max_system': self.max_system,
        }


def residual_system(am: AnsatzMetric, phi: np.ndarray, lam: float,
                    with_einstein: bool = False,
                    margin: int = NUMERICS_CONFIG['interior_margin']) -> AnsatzResiduals:
    """Back-substitute an ansatz metric into its defining equations."""
    chart = am.chart
    phi = chart.check_field(phi, 'phi')
    ps = phi_star(phi, chart)
    h3, h4 = am.h3, am.h4
    h4_star = chart.derivative(h4, 2)

    eq1 = laplace_residual(am.psi[:, :, 0, 0], chart)

    eq2 = None
    if am.rates is not None:
        dh3, dh4 = am.rates
        eq2 = max(float(np.max(np.abs(dh3 + h3 * ps / h4))),
                  float(np.max(np.abs(dh4 + h4 * ps / h3))))

    # beta w_i + alpha_i with beta = h4* phi*, alpha_i = h4* d_i phi
    eq3 = max(float(np.max(np.abs(h4_star * (ps * am.w[i] + chart.derivative(phi, i)))))
              for i in (0, 1))

    n_star = chart.derivative(am.n, 2)
    n_2star = chart.derivative(n_star, 2)
    gamma = chart.derivative(np.log(np.abs(h4) ** 1.5 / np.abs(h3)), 2)
    eq4 = interior_max(n_2star + gamma * n_star, chart, margin)

    with np.errstate(divide='ignore', invalid='ignore'):
        auxphi = float(np.max(np.abs(phi - np.log(np.abs(h4_star / np.sqrt(np.abs(h3 * h4)))))))
    ep2a = float(np.max(np.abs(h4_star - 2.0 * h3 * h4 * lam / ps)))

    lc = lc_constraint_residual(chart, h4, am.w, am.n)
    einstein = None
    if with_einstein:
        einstein = einstein_residual(am.to_dmetric(), (lam, lam, 0.0, 0.0),
                                     margin=margin).to_dict()
    res = AnsatzResiduals(eq1=eq1, eq2=eq2, eq3=eq3, eq4=eq4, auxphi=auxphi, ep2a=ep2a,
                          lc=lc, einstein=einstein)
    logger.debug(f"ansatz residuals: {res.to_dict()}")
    return res
