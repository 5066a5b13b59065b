"""
Command orchestration: one function per CLI command.

Each command receives a validated :class:`RunConfig` and a
:class:`RunDirectory`, writes its artifacts and returns a JSON-ready summary
that ends up in the manifest.
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ansatz import (AnsatzMetric, GeneratingData, field_from, generate, generate_family,
                     residual_system, sample_random_phi)
from .ansatz.data import check_phi_star
from .config import NUMERICS_CONFIG, OUTPUT_CONFIG
from .ensemble import mean_stderr, run_paths
from .errors import ConfigError, IntegrityError, NumericalError
from .flow import (FlowHistory, FlowState, ansatz_flow, f_evolution, monotonicity_report,
                   phi_at, run_general_flow, stochastic_ansatz_flows)
from .functionals import compare_connections, normalize_f, thermodynamics
from .geometry import DMetric, GridChart, NConnection, sasaki_lift, torsion_report
from .persistence import (RunDirectory, atomic_write, dumps_json, iter_run_dirs, load_manifest,
                          output_root, read_fields, sha256_bytes, verify_run)
from .schema import RunConfig
from .spde import SPDESetup, ensemble_run, run_path, self_convergence, soc_statistics

logger = logging.getLogger(__name__)

METRIC_FILE = 'metric.anhf'


def chart_from(cfg: RunConfig) -> GridChart:
    return GridChart.from_dict(cfg.grid.model_dump())


def generating_data(cfg: RunConfig, chart: GridChart) -> GeneratingData:
    return GeneratingData.from_config(chart, cfg.ansatz.block())


def _fatal(cfg: RunConfig, check: str, ok: bool, message: str) -> None:
    if ok:
        return
    if check in cfg.fatal:
        raise NumericalError(f"fatal check '{check}' failed: {message}")
    logger.warning(f"check '{check}' failed: {message}")


def initial_metric(cfg: RunConfig, chart: GridChart) -> DMetric:
    """The d-metric a flow or functionals run starts from."""
    opts = cfg.metric
    if opts.source == 'ansatz':
        return generate(generating_data(cfg, chart), 0).to_dmetric()
    if opts.source == 'run':
        run = Path(opts.input_run)
        target = next((run / name for name in (METRIC_FILE, 'metric_000.anhf')
                       if (run / name).is_file()), None)
        if target is None:
            raise ConfigError(f"input run {run} has no {METRIC_FILE}")
        failures = verify_run(run)
        if failures:
            raise IntegrityError(f"input run {run} fails checksums: {failures}")
        fields, file_chart, extra = read_fields(target)
        return DMetric.from_fields(fields, file_chart, extra.get('signature', 'riemannian'))
    N = np.stack([np.stack([field_from(e, chart) for e in row]) for row in opts.N])
    if opts.source == 'lagrangian':
        n_source = N if opts.n_source == 'user' else 'spray'
        return sasaki_lift(opts.lagrangian, chart, n_source, opts.signature)
    g = np.zeros((2, 2) + chart.shape)
    h = np.zeros((2, 2) + chart.shape)
    g[0, 0] = field_from(opts.g11, chart)
    g[0, 1] = g[1, 0] = field_from(opts.g12, chart)
    g[1, 1] = field_from(opts.g22, chart)
    h[0, 0] = field_from(opts.h33, chart)
    h[0, 1] = h[1, 0] = field_from(opts.h34, chart)
    h[1, 1] = field_from(opts.h44, chart)
    return DMetric(g, h, NConnection(N, chart), opts.signature)


def _metric_fields(m: DMetric) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    return m.to_fields(), {'signature': m.signature}


# gen-metric

def _residual_entry(am: AnsatzMetric, phi: np.ndarray, lam: float, with_einstein: bool) -> Dict:
    res = residual_system(am, phi, lam, with_einstein=with_einstein).to_dict()
    res['chi'] = am.chi
    res['torsion'] = torsion_report(am.to_dmetric())
    return res


def _gen_metric_path(index: int, data: GeneratingData, noise: Dict, seed: int) -> float:
    chart = data.chart
    phi = sample_random_phi(data.phi, noise, seed, data.chi, chart, path_index=index,
                            admissible=lambda p: check_phi_star(p, chart, data.eps_phi))
    sample = data.with_phi(phi)
    return max(residual_system(generate(sample, m), sample.phi[m], sample.lam).max_system
               for m in range(len(sample.chi)))


def gen_metric(cfg: RunConfig, rd: RunDirectory) -> Dict:
    chart = chart_from(cfg)
    data = generating_data(cfg, chart)
    entries = []
    for m, am in enumerate(generate_family(data)):
        suffix = '' if len(data.chi) == 1 else f"_{m:03d}"
        rd.write_fields(f"ansatz{suffix}.anhf", am.to_fields(), chart,
                        {'chi': am.chi, 'signs': list(am.signs)})
        fields, extra = _metric_fields(am.to_dmetric())
        rd.write_fields(f"metric{suffix}.anhf", fields, chart, extra)
        entries.append(_residual_entry(am, data.phi[m], data.lam, cfg.with_einstein))
    rd.write_json('residuals.json', entries)
    worst = max(e['max_system'] for e in entries)
    summary = {'samples': len(entries), 'max_system': worst,
               'lc': entries[0]['lc']}
    if cfg.with_einstein:
        summary['einstein_max'] = max(e['einstein']['max_norm'] for e in entries)
    _fatal(cfg, 'residuals', worst <= NUMERICS_CONFIG['tol_residual'],
           f"defining-system residual {worst:.3e}")

    noise = cfg.ansatz.noise
    if noise.amplitude > 0 and noise.paths > 1:
        results = run_paths(_gen_metric_path, noise.paths,
                            {'data': data, 'noise': noise.model_dump(), 'seed': cfg.seed},
                            cfg.ensemble.backend, cfg.ensemble.num_workers)
        rd.write_csv('ensemble_residuals.csv',
                     [{'path': r.index, 'max_system': r.value, 'failed': r.failed,
                       'error': r.error} for r in results],
                     ['path', 'max_system', 'failed', 'error'])
        summary['paths'] = noise.paths
        summary['failed_paths'] = sum(r.failed for r in results)
    return summary


# flow

def _potential_outputs(cfg: RunConfig, rd: RunDirectory, history: FlowHistory,
                       rows_by_chi: Dict[float, Dict]) -> Dict:
    opts = cfg.flow
    summary: Dict[str, Any] = {}
    family = f_evolution(history, opts.omega_final, opts.with_tau_term)
    drift = family.mass_drift()
    summary['mass_drift'] = drift
    _fatal(cfg, 'mass_drift', drift <= NUMERICS_CONFIG['tol_mass_drift'],
           f"potential mass drifts by {drift:.3e}")
    for k, snap in enumerate(history.snapshots):
        fields, extra = _metric_fields(snap.metric)
        fields['f'] = family.f[k]
        extra.update(chi=snap.chi, tau_hat=snap.tau_hat)
        rd.write_fields(f"snapshot_{k:04d}.anhf", fields, snap.metric.chart, extra)
    for row in family.rows():
        rows_by_chi.setdefault(row['chi'], {}).update(row)
    if len(history) >= 3:
        report = monotonicity_report(history, family)
        for row in report['rows']:
            rows_by_chi.setdefault(row['chi'], {}).update(row)
        summary.update(monotone=report['monotone'], min_slope=report['min_slope'],
                       mid_F_mismatch=report['mid_F_mismatch'],
                       mid_sigma_mismatch=report['mid_sigma_mismatch'])
        _fatal(cfg, 'monotonicity', report['monotone'],
               f"F decreases (slope {report['min_slope']:.3e})")
    return summary


FLOW_COLUMNS = ['chi', 'tau_hat', 'F', 'W', 'F_integrand', 'dF_fd', 'F_mismatch', 'sigma',
                'tau3_dW', 'sigma_mismatch', 'mass', 'mu_mass', 'mixed_ricci']


def flow(cfg: RunConfig, rd: RunDirectory) -> Dict:
    opts = cfg.flow
    chart = chart_from(cfg)
    rows_by_chi: Dict[float, Dict] = {}
    summary: Dict[str, Any] = {'kind': opts.kind}

    if opts.kind == 'general':
        m0 = initial_metric(cfg, chart)
        history = run_general_flow(m0, opts.dchi, opts.steps, opts.lam, opts.lambda_term,
                                   opts.tau0, opts.snapshot_stride)
        for row in history.rows:
            rows_by_chi.setdefault(row['chi'], {}).update(row)
    else:
        data = generating_data(cfg, chart)
        result = ansatz_flow(data, opts.dchi, opts.steps, stride=opts.snapshot_stride)
        rd.write_csv('ansatz_flow.csv', result.rows,
                     ['chi', 'h3_mean', 'h4_mean', 'h3_min_abs', 'h4_min_abs', 'mixed_ricci'])
        final = result.final
        final_res = residual_system(final, phi_at(data, final.chi), data.lam)
        summary.update(eq2=final_res.eq2,
                       max_mixed_ricci=max(r['mixed_ricci'] for r in result.rows))
        history = FlowHistory()
        for am in result.snapshots:
            history.append(FlowState(metric=am.to_dmetric(), chi=am.chi,
                                     tau_hat=opts.tau0 - (am.chi - data.chi[0])))
        for row in result.rows:
            rows_by_chi.setdefault(row['chi'], {}).update(chi=row['chi'],
                                                          mixed_ricci=row['mixed_ricci'])

        noise = cfg.ansatz.noise
        if noise.amplitude > 0 and noise.paths > 1:
            ens = stochastic_ansatz_flows(data, noise.model_dump(), cfg.seed, noise.paths,
                                          opts.dchi, opts.steps, cfg.ensemble.backend,
                                          cfg.ensemble.num_workers)
            if 'chi' in ens:
                rd.write_csv('ansatz_ensemble.csv',
                             [{'chi': c, 'h3_mean': a, 'h3_stderr': b, 'h4_mean': d,
                               'h4_stderr': e}
                              for c, a, b, d, e in zip(ens['chi'], ens['h3_mean'],
                                                       ens['h3_mean_stderr'], ens['h4_mean'],
                                                       ens['h4_mean_stderr'])])
            summary.update(paths=ens['paths'], failed_paths=ens['failed'])

    breathers = history.breather_records(opts.breather_tol)
    rd.write_json('breathers.json', breathers)
    if opts.potential:
        summary.update(_potential_outputs(cfg, rd, history, rows_by_chi))
    else:
        for k, snap in enumerate(history.snapshots):
            fields, extra = _metric_fields(snap.metric)
            extra.update(chi=snap.chi, tau_hat=snap.tau_hat)
            rd.write_fields(f"snapshot_{k:04d}.anhf", fields, snap.metric.chart, extra)
    rows = [rows_by_chi[c] for c in sorted(rows_by_chi)]
    rd.write_csv('flow.csv', rows, FLOW_COLUMNS)
    summary.update(snapshots=len(history), chi_end=float(history.chis[-1]))
    return summary


# spde

def _trajectory_rows(summary: Dict) -> List[Dict]:
    keys = ('l2', 'u_min', 'u_max', 'm')
    rows = []
    for k, chi in enumerate(summary['chi']):
        row = {'chi': chi}
        for key in keys:
            row[f"{key}_mean"] = summary[key]['mean'][k]
            row[f"{key}_q05"] = summary[key]['q05'][k]
            row[f"{key}_q95"] = summary[key]['q95'][k]
        rows.append(row)
    return rows


def spde(cfg: RunConfig, rd: RunDirectory) -> Dict:
    opts = cfg.spde
    setup = SPDESetup.from_config(opts.block(), seed=cfg.seed)
    pairs = setup.noise.pairs
    rd.write_json('eigen.json', {'noise': setup.noise.to_dict(), 'residual': pairs.residual,
                                 'orthonormality': pairs.orthonormality,
                                 'graph': setup.graph.to_dict(), 'eps': setup.eps})

    if opts.paths == 1:
        record = run_path(setup, 0)
        records = [record]
        rd.write_csv('trajectory.csv', record.rows(), ['chi', 'l2', 'min', 'max', 'm'])
        positivity = record.positivity_ok
        global_min = float(min(record.u_min))
        failed = 0
    else:
        result = ensemble_run(setup, opts.paths, cfg.ensemble.backend, cfg.ensemble.num_workers)
        records = result.records
        ens = result.summary()
        rd.write_json('paths.json', [r.to_dict() for r in records])
        if result.ok_records:
            rd.write_csv('ensemble.csv', _trajectory_rows(ens))
        positivity = ens['positivity']
        global_min = ens.get('global_min')
        failed = ens['failed']

    soc = soc_statistics(records, opts.burn_in)
    rd.write_json('soc.json', soc)
    ok = [r for r in records if not r.failed]
    if ok:
        coords = setup.domain.coordinates()
        U = setup.domain.to_full(ok[0].final_U)
        names = list(coords)
        flat = [coords[n].ravel() for n in names]
        rd.write_csv('final_state.csv',
                     [dict(zip(names + ['U'], vals)) for vals in zip(*flat, U.ravel())],
                     names + ['U'])

    summary = {'paths': opts.paths, 'failed_paths': failed, 'positivity': positivity,
               'global_min': global_min, 'absorption_flag': soc.get('absorption_flag'),
               'inconclusive': soc.get('inconclusive'), 'eps': setup.eps}
    if opts.self_convergence is not None:
        sc = opts.self_convergence
        study = self_convergence(setup, sc.levels, sc.path_index, sc.alt_newton_tol)
        rd.write_json('self_convergence.json', study)
        summary['orders'] = study['orders']
    _fatal(cfg, 'positivity', positivity is not False, f"min U = {global_min}")
    _fatal(cfg, 'absorption', soc.get('absorption_flag') is not False,
           f"absorption flag {soc.get('absorption_flag')}")
    return summary


# functionals

def _evaluate_functionals(m: DMetric, f_expr, opts) -> Dict:
    chart = m.chart
    f = field_from(f_expr, chart)
    if opts.normalize:
        f = normalize_f(f, opts.tau, m)
    return thermodynamics(m, f, opts.tau).to_dict()


def _functionals_path(index: int, data: GeneratingData, noise: Dict, seed: int,
                      f_expr, opts) -> Dict:
    chart = data.chart
    phi = sample_random_phi(data.phi, noise, seed, data.chi, chart, path_index=index,
                            admissible=lambda p: check_phi_star(p, chart, data.eps_phi))
    return _evaluate_functionals(generate(data.with_phi(phi), 0).to_dmetric(), f_expr, opts)


STOCHASTIC_KEYS = ('F', 'W', 'E', 'S_entropy', 'sigma', 'Z_log')


def functionals(cfg: RunConfig, rd: RunDirectory) -> Dict:
    opts = cfg.functionals
    chart = chart_from(cfg)
    m = initial_metric(cfg, chart)
    f = field_from(opts.f, chart)
    if opts.normalize:
        f = normalize_f(f, opts.tau, m)
    report = thermodynamics(m, f, opts.tau).to_dict()
    out = {'F': report['F'], 'W': report['W'], 'E': report['E'], 'S': report['S_entropy'],
           'sigma': report['sigma'], 'logZ': report['Z_log'],
           'connection': report['connection_tag'], 'tau': opts.tau,
           'closure_gap': report['closure_gap'], 'n_paths': 1}
    if opts.compare_connections:
        out['comparison'] = compare_connections(m, f, opts.tau)

    noise = cfg.ansatz.noise
    if cfg.metric.source == 'ansatz' and noise.amplitude > 0 and noise.paths > 1:
        data = generating_data(cfg, chart)
        results = run_paths(_functionals_path, noise.paths,
                            {'data': data, 'noise': noise.model_dump(), 'seed': cfg.seed,
                             'f_expr': opts.f, 'opts': opts},
                            cfg.ensemble.backend, cfg.ensemble.num_workers)
        ok = [r.value for r in results if not r.failed]
        out['n_paths'] = len(ok)
        out['failed_paths'] = noise.paths - len(ok)
        if ok:
            for key in STOCHASTIC_KEYS:
                stats = mean_stderr([v[key] for v in ok])
                out[f"{key}_mean"] = float(stats['mean'])
                out[f"{key}_stderr"] = float(stats['stderr'])
    rd.write_json('functionals.json', out)
    return {k: v for k, v in out.items() if not isinstance(v, dict)}


# report

def _scalar_items(summary: Dict) -> Dict[str, float]:
    return {k: float(v) for k, v in summary.items()
            if isinstance(v, (int, float)) and not isinstance(v, bool)}


def report(run_dirs: Sequence[str], out: Optional[str] = None) -> Path:
    """Merge the manifests of ``run_dirs`` into report.json and report.dat.

    Raises IntegrityError (after writing the report) when any run fails its checksums.
    """
    entries, broken = [], {}
    for path in iter_run_dirs(run_dirs):
        manifest = load_manifest(path)
        failures = verify_run(path)
        if failures:
            broken[path.name] = failures
        entries.append({'run': path.name, 'command': manifest.command, 'seed': manifest.seed,
                        'config_hash': manifest.config_hash, 'status': manifest.status,
                        'version': manifest.version, 'summary': manifest.summary,
                        'checksum_failures': failures})
    names = sorted({k for e in entries for k in _scalar_items(e['summary'])})
    tag = sha256_bytes('\n'.join(sorted(e['run'] for e in entries)).encode('utf-8'))[:12]
    target = output_root(out) / f"report-{tag}"
    target.mkdir(parents=True, exist_ok=True)
    atomic_write(target / 'report.json',
                 dumps_json({'runs': entries, 'checksum_failures': broken}).encode('utf-8'))
    lines = ['# ' + ' '.join(['index', 'seed'] + names)]
    for k, e in enumerate(entries):
        values = _scalar_items(e['summary'])
        lines.append(' '.join([str(k), str(e['seed'])] +
                              [format(values[n], OUTPUT_CONFIG['float_format'])
                               if n in values else 'nan' for n in names]))
    atomic_write(target / 'report.dat', ('\n'.join(lines) + '\n').encode('utf-8'))
    logger.info(f"Report for {len(entries)} runs written to {target}")
    if broken:
        raise IntegrityError(f"checksum failures in {sorted(broken)}", details=broken)
    return target


COMMANDS: Dict[str, Callable[[RunConfig, RunDirectory], Dict]] = {
    'gen-metric': gen_metric,
    'flow': flow,
    'spde': spde,
    'functionals': functionals,
}


def execute(cfg: RunConfig) -> Path:
    """Run ``cfg.command`` into its run directory; a failure leaves a failed manifest."""
    rd = RunDirectory(output_root(cfg.output_dir), cfg.command, cfg.config_hash(), cfg.seed)
    rd.write_json('config.json', cfg.model_dump(mode='json', by_alias=True))
    try:
        summary = COMMANDS[cfg.command](cfg, rd)
    except Exception as e:
        rd.finalize('failed', error=f"{type(e).__name__}: {e}")
        raise
    rd.finalize('ok', summary=summary)
    return rd.path
