"""Ricci flows of d-metrics, the backward potential pass and monotonicity checks."""

from .ansatz_flow import (AnsatzFlowResult, ansatz_flow, ansatz_rates, flow_step_ansatz, phi_at,
                          stochastic_ansatz_flows)
from .general_flow import flow_step_general, ricci_rates, run_general_flow
from .monotonicity import functional_series, monotonicity_report
from .potential import (PotentialFamily, conjugate_operator, f_evolution,
                        laplace_beltrami_matrix)
from .state import FlowHistory, FlowState, Snapshot, breather_records, rk4

__all__ = [
    'AnsatzFlowResult', 'ansatz_flow', 'ansatz_rates', 'flow_step_ansatz', 'phi_at',
    'stochastic_ansatz_flows',
    'flow_step_general', 'ricci_rates', 'run_general_flow',
    'functional_series', 'monotonicity_report',
    'PotentialFamily', 'conjugate_operator', 'f_evolution', 'laplace_beltrami_matrix',
    'FlowHistory', 'FlowState', 'Snapshot', 'breather_records', 'rk4',
]
