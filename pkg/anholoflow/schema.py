"""
Run-file schema.

A run file is a JSON document validated by :class:`RunConfig` before any
computation. Every model forbids unknown keys; defaults come from
:mod:`anholoflow.config`.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .config import (ANSATZ_CONFIG, ENSEMBLE_CONFIG, FLOW_CONFIG, FUNCTIONALS_CONFIG, GRID_CONFIG,
                     SPDE_CONFIG)
from .errors import ConfigError

logger = logging.getLogger(__name__)

Scalar = Union[str, float]
COMMANDS = ('gen-metric', 'flow', 'spde', 'functionals', 'report')


class _Model(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)


class AxisModel(_Model):
    name: str
    min: float
    max: float
    count: int = Field(ge=GRID_CONFIG['min_points'])
    boundary: Literal['dirichlet', 'periodic'] = 'dirichlet'

    @model_validator(mode='after')
    def _extent(self):
        if not self.max > self.min:
            raise ValueError(f"axis {self.name}: max must exceed min")
        return self


class GridModel(_Model):
    axes: List[AxisModel] = Field(
        default_factory=lambda: [AxisModel(**a) for a in GRID_CONFIG['axes']],
        min_length=4, max_length=4)


class PhiNoiseModel(_Model):
    amplitude: float = Field(ANSATZ_CONFIG['noise']['amplitude'], ge=0.0)
    correlation_time: float = Field(ANSATZ_CONFIG['noise']['correlation_time'], gt=0.0)
    modes: int = Field(ANSATZ_CONFIG['noise']['modes'], ge=0)
    paths: int = Field(ANSATZ_CONFIG['noise']['paths'], ge=1)
    max_attempts: int = Field(ANSATZ_CONFIG['noise']['max_attempts'], ge=1)


class AnsatzModel(_Model):
    phi0: Scalar = ANSATZ_CONFIG['phi0']
    lam: float = Field(ANSATZ_CONFIG['lambda'], alias='lambda')
    h4_0: Scalar = ANSATZ_CONFIG['h4_0']
    n1: List[Scalar] = Field(default_factory=lambda: list(ANSATZ_CONFIG['n1']),
                             min_length=2, max_length=2)
    n2: List[Scalar] = Field(default_factory=lambda: list(ANSATZ_CONFIG['n2']),
                             min_length=2, max_length=2)
    psi_boundary: Scalar = ANSATZ_CONFIG['psi_boundary']
    chi: List[float] = Field(default_factory=lambda: list(ANSATZ_CONFIG['chi']), min_length=1)
    signs: List[float] = Field(default_factory=lambda: list(ANSATZ_CONFIG['signs']),
                               min_length=2, max_length=2)
    noise: PhiNoiseModel = Field(default_factory=PhiNoiseModel)

    @field_validator('lam')
    @classmethod
    def _nonzero_lambda(cls, v: float) -> float:
        if v == 0.0:
            raise ValueError("lambda must be nonzero (h4 = 0h4 + exp(2 phi)/(4 lambda))")
        return v

    @field_validator('signs')
    @classmethod
    def _unit_signs(cls, v: List[float]) -> List[float]:
        if any(s not in (1.0, -1.0) for s in v):
            raise ValueError("signs must be +1 or -1")
        return v

    @field_validator('chi')
    @classmethod
    def _increasing(cls, v: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(v[:-1], v[1:])):
            raise ValueError("chi samples must be strictly increasing")
        return v

    def block(self) -> Dict[str, Any]:
        """Block in the layout of ANSATZ_CONFIG."""
        return self.model_dump(by_alias=True)


class MetricModel(_Model):
    """Initial d-metric: the ansatz block, a previous gen-metric run, expressions or
    the Sasaki lift of a Lagrangian."""

    source: Literal['ansatz', 'run', 'expressions', 'lagrangian'] = 'ansatz'
    input_run: Optional[str] = None
    lagrangian: Optional[Scalar] = None
    n_source: Literal['spray', 'user'] = 'spray'
    g11: Scalar = '1'
    g12: Scalar = '0'
    g22: Scalar = '1'
    h33: Scalar = '1'
    h34: Scalar = '0'
    h44: Scalar = '1'
    N: List[List[Scalar]] = Field(default_factory=lambda: [['0', '0'], ['0', '0']])
    signature: Literal['riemannian', 'lorentz_v'] = 'riemannian'

    @model_validator(mode='after')
    def _source_inputs(self):
        if self.source == 'run' and not self.input_run:
            raise ValueError("metric source 'run' needs input_run")
        if self.source == 'lagrangian' and self.lagrangian is None:
            raise ValueError("metric source 'lagrangian' needs a lagrangian expression")
        if len(self.N) != 2 or any(len(row) != 2 for row in self.N):
            raise ValueError("N must be a 2x2 list")
        return self


class FlowModel(_Model):
    kind: Literal['general', 'ansatz'] = FLOW_CONFIG['kind']
    dchi: float = Field(FLOW_CONFIG['dchi'], gt=0.0)
    steps: int = Field(FLOW_CONFIG['steps'], ge=1)
    lam: float = Field(FLOW_CONFIG['lambda'], alias='lambda')
    lambda_term: bool = FLOW_CONFIG['lambda_term']
    tau0: float = Field(FLOW_CONFIG['tau0'], gt=0.0)
    snapshot_stride: int = Field(FLOW_CONFIG['snapshot_stride'], ge=1)
    with_tau_term: bool = FLOW_CONFIG['with_tau_term']
    omega_final: Scalar = FLOW_CONFIG['omega_final']
    breather_tol: float = Field(FLOW_CONFIG['breather_tol'], gt=0.0)
    potential: bool = True

    @model_validator(mode='after')
    def _tau_stays_positive(self):
        if self.dchi * self.steps >= self.tau0:
            raise ValueError(f"tau0={self.tau0} is reached before chi={self.dchi * self.steps}")
        return self


class GraphModel(_Model):
    variant: Literal['stefan', 'sign_power', 'heaviside_soc', 'linear']
    kappa: Optional[float] = Field(None, ge=0.0)
    c_u: Optional[float] = None
    chi0: Optional[float] = None
    rho: Optional[float] = Field(None, ge=0.0)
    alpha1: Optional[float] = Field(None, ge=0.0)
    alpha2: Optional[float] = Field(None, ge=0.0)
    alpha: Optional[float] = Field(None, ge=0.0, le=1.0)
    a: Optional[float] = Field(None, ge=0.0)


class DomainAxisModel(_Model):
    name: str
    min: float
    max: float
    count: int = Field(ge=3)


class DomainModel(_Model):
    axes: List[DomainAxisModel] = Field(
        default_factory=lambda: [DomainAxisModel(**a) for a in SPDE_CONFIG['domain']['axes']],
        min_length=1, max_length=3)
    psi: Scalar = SPDE_CONFIG['domain']['psi']
    signature: Literal['riemannian', 'lorentz_v'] = 'riemannian'


class SPDENoiseModel(_Model):
    modes: int = Field(SPDE_CONFIG['noise']['modes'], ge=1)
    nu_rule: Literal['power', 'constant', 'list'] = SPDE_CONFIG['noise']['nu_rule']
    nu_power: float = SPDE_CONFIG['noise']['nu_power']
    nu_scale: float = Field(SPDE_CONFIG['noise']['nu_scale'], ge=0.0)
    nu: Optional[List[float]] = None
    l: Optional[Scalar] = SPDE_CONFIG['noise']['l']
    offset: float = SPDE_CONFIG['noise']['offset']


class SelfConvergenceModel(_Model):
    levels: int = Field(3, ge=2)
    path_index: int = Field(0, ge=0)
    alt_newton_tol: Optional[float] = Field(1e-9, gt=0.0)


class SPDEModel(_Model):
    graph: GraphModel = Field(default_factory=lambda: GraphModel(**SPDE_CONFIG['graph']))
    domain: DomainModel = Field(default_factory=DomainModel)
    noise: SPDENoiseModel = Field(default_factory=SPDENoiseModel)
    initial: Scalar = SPDE_CONFIG['initial']
    dchi: float = Field(SPDE_CONFIG['dchi'], gt=0.0)
    steps: int = Field(SPDE_CONFIG['steps'], ge=1)
    paths: int = Field(SPDE_CONFIG['paths'], ge=1)
    eps_min: float = Field(SPDE_CONFIG['eps_min'], gt=0.0)
    eps_coeff: float = Field(SPDE_CONFIG['eps_coeff'], ge=0.0)
    burn_in: int = Field(SPDE_CONFIG['burn_in'], ge=0)
    threshold: Optional[float] = None
    dense_eigen_limit: int = Field(SPDE_CONFIG['dense_eigen_limit'], ge=1)
    eigen_tol: float = Field(SPDE_CONFIG['eigen_tol'], gt=0.0)
    positivity_tol: float = Field(SPDE_CONFIG['positivity_tol'], ge=0.0)
    self_convergence: Optional[SelfConvergenceModel] = None

    def block(self) -> Dict[str, Any]:
        data = self.model_dump(exclude={'self_convergence'})
        data['graph'] = self.graph.model_dump(exclude_none=True)
        return data


class FunctionalsModel(_Model):
    tau: float = Field(FUNCTIONALS_CONFIG['tau'], gt=0.0)
    f: Scalar = FUNCTIONALS_CONFIG['f']
    normalize: bool = FUNCTIONALS_CONFIG['normalize']
    compare_connections: bool = True


class EnsembleModel(_Model):
    backend: Literal['serial', 'ray'] = ENSEMBLE_CONFIG['backend']
    num_workers: Optional[int] = Field(ENSEMBLE_CONFIG['num_workers'], ge=1)


class RunConfig(_Model):
    """A validated run file."""

    command: Literal['gen-metric', 'flow', 'spde', 'functionals']
    seed: int = Field(0, ge=0, lt=2 ** 64)
    output_dir: Optional[str] = None
    grid: GridModel = Field(default_factory=GridModel)
    ansatz: AnsatzModel = Field(default_factory=AnsatzModel)
    metric: MetricModel = Field(default_factory=MetricModel)
    flow: FlowModel = Field(default_factory=FlowModel)
    spde: SPDEModel = Field(default_factory=SPDEModel)
    functionals: FunctionalsModel = Field(default_factory=FunctionalsModel)
    ensemble: EnsembleModel = Field(default_factory=EnsembleModel)
    with_einstein: bool = True
    fatal: List[Literal['residuals', 'positivity', 'monotonicity', 'mass_drift',
                        'absorption']] = Field(default_factory=list)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of everything except seed and output_dir."""
        payload = self.model_dump(mode='json', by_alias=True, exclude={'seed', 'output_dir'})
        text = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _format_errors(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = '.'.join(str(p) for p in e['loc']) or '<root>'
        parts.append(f"{loc}: {e['msg']}")
    return '; '.join(parts)


def parse_config(data: Dict[str, Any], seed: Optional[int] = None,
                 output_dir: Optional[str] = None) -> RunConfig:
    """Validate a run document; CLI overrides replace the file's seed and output_dir."""
    if not isinstance(data, dict):
        raise ConfigError("run file must contain a JSON object")
    data = dict(data)
    if seed is not None:
        data['seed'] = seed
    if output_dir is not None:
        data['output_dir'] = str(output_dir)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid run file: {_format_errors(e)}",
                          details={'errors': [str(x['loc']) for x in e.errors()]}) from e


def load_config(path: Union[str, Path], seed: Optional[int] = None,
                output_dir: Optional[str] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"run file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"run file {path} is not valid JSON: {e}") from e
    cfg = parse_config(data, seed, output_dir)
    logger.info(f"Loaded {cfg.command} run file {path} (seed {cfg.seed})")
    return cfg
