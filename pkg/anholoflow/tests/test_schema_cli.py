"""
Tests for run-file validation and the command-line front end.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from anholoflow.cli import main
from anholoflow.errors import ConfigError
from anholoflow.persistence import load_manifest, verify_run
from anholoflow.runs import chart_from, initial_metric
from anholoflow.schema import load_config, parse_config

SMALL_GRID = {'axes': [
    {'name': 'x1', 'min': 0.0, 'max': 1.0, 'count': 9},
    {'name': 'x2', 'min': 0.0, 'max': 1.0, 'count': 9},
    {'name': 't', 'min': 0.0, 'max': 1.0, 'count': 9},
    {'name': 'y4', 'min': 0.0, 'max': 1.0, 'count': 3, 'boundary': 'periodic'},
]}

PERIODIC_GRID = {'axes': [
    {'name': n, 'min': 0.0, 'max': 1.0, 'count': 6, 'boundary': 'periodic'}
    for n in ('x1', 'x2', 't', 'y4')
]}


def gen_metric_doc(**ansatz):
    return {'command': 'gen-metric', 'seed': 0, 'grid': SMALL_GRID,
            'ansatz': {'phi0': 't', 'lambda': 0.25, **ansatz}, 'with_einstein': False}


def write_run_file(tmp_path, doc, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(capsys, *argv):
    code = main(['--log-level', 'WARNING', *argv])
    return code, capsys.readouterr().out.strip()


def test_unknown_key_rejected():
    """Run files may not carry unknown keys."""
    with pytest.raises(ConfigError):
        parse_config({'command': 'spde', 'spdee': {}})


def test_lambda_zero_rejected():
    """lambda = 0 fails validation."""
    with pytest.raises(ConfigError):
        parse_config(gen_metric_doc(**{'lambda': 0.0}))


def test_flow_must_end_before_tau_vanishes():
    """dchi * steps must stay below tau0."""
    with pytest.raises(ConfigError):
        parse_config({'command': 'flow', 'flow': {'dchi': 0.1, 'steps': 10, 'tau0': 1.0}})


def test_lambda_alias():
    """The JSON key lambda fills the lam field."""
    cfg = parse_config(gen_metric_doc(**{'lambda': 0.5}))
    assert cfg.ansatz.lam == 0.5
    assert cfg.ansatz.block()['lambda'] == 0.5


def test_seed_override_keeps_hash():
    """The seed is not part of the configuration hash."""
    a = parse_config(gen_metric_doc(), seed=1)
    b = parse_config(gen_metric_doc(), seed=2)
    assert (a.seed, b.seed) == (1, 2)
    assert a.config_hash() == b.config_hash()
    assert parse_config(gen_metric_doc(phi0='2*t')).config_hash() != a.config_hash()


def test_lagrangian_metric_source():
    """A quadratic Lagrangian lifts to the identity d-metric."""
    grid = {'axes': [{'name': n, 'min': 0.0, 'max': 1.0, 'count': 5}
                      for n in ('x1', 'x2', 't', 'y4')]}
    cfg = parse_config({'command': 'functionals', 'grid': grid,
                        'metric': {'source': 'lagrangian', 'lagrangian': 't**2 + y4**2'}})
    m = initial_metric(cfg, chart_from(cfg))
    np.testing.assert_allclose(m.h[1, 1], 1.0, atol=1e-10)
    np.testing.assert_allclose(m.g, m.h)
    with pytest.raises(ConfigError):
        parse_config({'command': 'functionals', 'metric': {'source': 'lagrangian'}})


def test_missing_run_file(tmp_path):
    """A run file that does not exist is a config error."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'absent.json')


def test_gen_metric_run(tmp_path, capsys):
    """gen-metric writes a verified run directory."""
    config = write_run_file(tmp_path, gen_metric_doc())
    code, out = run_cli(capsys, 'gen-metric', '--config', config, '--out', str(tmp_path / 'runs'))
    assert code == 0
    manifest = load_manifest(out)
    assert manifest.status == 'ok'
    assert {'metric.anhf', 'ansatz.anhf', 'residuals.json', 'config.json'} <= \
        {f.name for f in manifest.files}
    assert manifest.summary['samples'] == 1
    assert verify_run(out) == []


def test_reruns_are_byte_identical(tmp_path, capsys):
    """Same run file and seed reproduce every artifact."""
    config = write_run_file(tmp_path, gen_metric_doc())
    root = str(tmp_path / 'runs')
    _, out = run_cli(capsys, 'gen-metric', '--config', config, '--out', root)
    first = {f.name: f.sha256 for f in load_manifest(out).files}
    _, again = run_cli(capsys, 'gen-metric', '--config', config, '--out', root)
    assert again == out
    assert {f.name: f.sha256 for f in load_manifest(out).files} == first


def test_config_error_exit_code(tmp_path, capsys):
    """Invalid run files exit with 2."""
    config = write_run_file(tmp_path, gen_metric_doc(**{'lambda': 0.0}))
    code, _ = run_cli(capsys, 'gen-metric', '--config', config, '--out', str(tmp_path))
    assert code == 2


def test_command_mismatch_exit_code(tmp_path, capsys):
    """A gen-metric run file cannot drive the spde command."""
    config = write_run_file(tmp_path, gen_metric_doc())
    code, _ = run_cli(capsys, 'spde', '--config', config, '--out', str(tmp_path))
    assert code == 2


def test_numeric_failure_leaves_failed_manifest(tmp_path, capsys):
    """phi without t-dependence exits with 3 and marks the run failed."""
    config = write_run_file(tmp_path, gen_metric_doc(phi0='x1'))
    root = tmp_path / 'runs'
    code, _ = run_cli(capsys, 'gen-metric', '--config', config, '--out', str(root))
    assert code == 3
    (run_dir,) = root.glob('gen-metric-*')
    manifest = load_manifest(run_dir)
    assert manifest.status == 'failed'
    assert 'GeneratingFunctionError' in manifest.error


def test_report_merges_seeds(tmp_path, capsys):
    """Two seeds of one run file become two report rows."""
    config = write_run_file(tmp_path, gen_metric_doc())
    root = str(tmp_path / 'runs')
    _, first = run_cli(capsys, 'gen-metric', '--config', config, '--seed', '1', '--out', root)
    _, second = run_cli(capsys, 'gen-metric', '--config', config, '--seed', '2', '--out', root)
    assert first != second
    code, target = run_cli(capsys, 'report', first, second, '--out', root)
    assert code == 0
    lines = (Path(target) / 'report.dat').read_text().splitlines()
    assert lines[0].startswith('# index seed')
    assert [line.split()[1] for line in lines[1:]] == ['1', '2']
    merged = json.loads((Path(target) / 'report.json').read_text())
    assert merged['checksum_failures'] == {}


def test_report_detects_tampering(tmp_path, capsys):
    """An edited artifact makes report exit with 4."""
    config = write_run_file(tmp_path, gen_metric_doc())
    root = str(tmp_path / 'runs')
    _, out = run_cli(capsys, 'gen-metric', '--config', config, '--out', root)
    with open(f"{out}/residuals.json", 'a') as fh:
        fh.write(' ')
    code, _ = run_cli(capsys, 'report', out, '--out', root)
    assert code == 4


def test_functionals_run(tmp_path, capsys):
    """A product metric gives the same entropy for both connections."""
    doc = {'command': 'functionals', 'grid': PERIODIC_GRID,
           'metric': {'source': 'expressions', 'g11': '1 + 0.1*sin(2*pi*x1)',
                      'h33': '2 + 0.2*sin(2*pi*t)'},
           'functionals': {'tau': 0.5}}
    config = write_run_file(tmp_path, doc)
    code, out = run_cli(capsys, 'functionals', '--config', config,
                        '--out', str(tmp_path / 'runs'))
    assert code == 0
    result = json.loads((Path(out) / 'functionals.json').read_text())
    assert result['comparison']['verdict'] == 'equivalent'
    assert result['S'] == -result['W']
    assert result['tau'] == 0.5


def test_ansatz_flow_run(tmp_path, capsys):
    """The ansatz flow writes its series, breathers and snapshots."""
    doc = {'command': 'flow', 'grid': SMALL_GRID, 'ansatz': {'phi0': 't'},
           'flow': {'kind': 'ansatz', 'dchi': 1e-3, 'steps': 2, 'potential': False}}
    config = write_run_file(tmp_path, doc)
    code, out = run_cli(capsys, 'flow', '--config', config, '--out', str(tmp_path / 'runs'))
    assert code == 0
    names = {f.name for f in load_manifest(out).files}
    assert {'ansatz_flow.csv', 'breathers.json', 'flow.csv', 'snapshot_0000.anhf'} <= names
    assert load_manifest(out).summary['snapshots'] == 3


def test_general_flow_run_with_potential(tmp_path, capsys):
    """A flat metric stays put; the potential pass and monotonicity run on it."""
    doc = {'command': 'flow', 'grid': PERIODIC_GRID, 'metric': {'source': 'expressions'},
           'flow': {'kind': 'general', 'dchi': 0.01, 'steps': 3},
           'fatal': ['monotonicity', 'mass_drift']}
    config = write_run_file(tmp_path, doc)
    code, out = run_cli(capsys, 'flow', '--config', config, '--out', str(tmp_path / 'runs'))
    assert code == 0
    summary = load_manifest(out).summary
    assert summary['monotone'] is True
    assert summary['mass_drift'] < 1e-12
    header = (Path(out) / 'flow.csv').read_text().splitlines()[0]
    assert header.startswith('chi,tau_hat,F,W')


def test_spde_run(tmp_path, capsys):
    """A short noisy SPDE run records positivity and the SOC verdict."""
    doc = {'command': 'spde', 'seed': 5,
           'spde': {'domain': {'axes': [{'name': 'x1', 'min': 0.0, 'max': 1.0, 'count': 17}]},
                    'noise': {'modes': 3}, 'initial': '0.2 + 0.4*sin(pi*x1)',
                    'dchi': 1e-3, 'steps': 5, 'paths': 2},
           'fatal': ['positivity']}
    config = write_run_file(tmp_path, doc)
    code, out = run_cli(capsys, 'spde', '--config', config, '--out', str(tmp_path / 'runs'))
    assert code == 0
    manifest = load_manifest(out)
    assert manifest.summary['positivity'] is True
    assert {'eigen.json', 'paths.json', 'ensemble.csv', 'soc.json', 'final_state.csv'} <= \
        {f.name for f in manifest.files}
