"""
Tests for field files, CSV formatting and run manifests.
"""

import json

import numpy as np
import pytest

from anholoflow.errors import IntegrityError
from anholoflow.persistence import (RunDirectory, decode_fields, dumps_json, encode_csv,
                                    encode_fields, load_manifest, read_csv, run_dir_name,
                                    verify_run)


def test_field_file_roundtrip(ansatz_chart):
    """Fields, chart and header extras survive encoding."""
    t = ansatz_chart.coordinates()[2]
    data = encode_fields({'h4': np.exp(2 * t), 'h3': 4.0 * np.ones(ansatz_chart.shape)},
                         ansatz_chart, extra={'chi': 0.5})
    fields, chart, extra = decode_fields(data)
    assert list(fields) == ['h4', 'h3']
    assert chart == ansatz_chart
    assert extra == {'chi': 0.5}
    np.testing.assert_array_equal(fields['h4'], np.exp(2 * t))


def test_field_file_bad_magic(ansatz_chart):
    """Foreign files are integrity errors."""
    data = encode_fields({'f': np.zeros(ansatz_chart.shape)}, ansatz_chart)
    with pytest.raises(IntegrityError):
        decode_fields(b'XXXXX\n' + data[6:])


def test_field_file_truncated(ansatz_chart):
    """A short body is detected from the header."""
    data = encode_fields({'f': np.zeros(ansatz_chart.shape)}, ansatz_chart)
    with pytest.raises(IntegrityError):
        decode_fields(data[:-8])


def test_csv_cells():
    """Floats round-trip exactly, None is empty and booleans are lowercase."""
    text = encode_csv([{'chi': 0.1, 'ok': True, 'm': None, 'n': 3}]).decode()
    assert text == 'chi,ok,m,n\n0.10000000000000001,true,,3\n'


def test_csv_column_order(tmp_path):
    """Explicit columns fix the order and fill gaps."""
    path = tmp_path / 'series.csv'
    path.write_bytes(encode_csv([{'b': 1.5, 'a': 2.0}, {'a': 0.25}], columns=['a', 'b']))
    rows = read_csv(path)
    assert rows == [{'a': '2', 'b': '1.5'}, {'a': '0.25', 'b': ''}]


def test_json_is_key_ordered():
    """Keys are sorted and numpy scalars become builtins."""
    assert json.loads(dumps_json({'b': np.float64(1.0), 'a': np.arange(2)})) == \
        {'a': [0, 1], 'b': 1.0}
    assert dumps_json({'b': 1, 'a': 2}).index('"a"') < dumps_json({'b': 1, 'a': 2}).index('"b"')


def test_run_directory_manifest(tmp_path):
    """Every artifact is registered with its checksum and verifies clean."""
    rd = RunDirectory(tmp_path, 'spde', 'ab' * 32, 3)
    assert rd.path.name == run_dir_name('spde', 'ab' * 32, 3) == 'spde-abababababab-s3'
    rd.write_json('soc.json', {'absorption_flag': True})
    rd.write_csv('trajectory.csv', [{'chi': 0.0, 'm': 1.0}])
    manifest = rd.finalize('ok', summary={'paths': 1})
    assert {f.name for f in manifest.files} == {'soc.json', 'trajectory.csv'}
    loaded = load_manifest(rd.path)
    assert loaded.status == 'ok'
    assert loaded.summary == {'paths': 1}
    assert verify_run(rd.path) == []


def test_tampered_file_detected(tmp_path):
    """Changing an artifact after the run breaks its checksum."""
    rd = RunDirectory(tmp_path, 'flow', 'cd' * 32, 0)
    rd.write_text('notes.txt', 'original')
    rd.finalize()
    (rd.path / 'notes.txt').write_text('edited')
    assert verify_run(rd.path) == ['notes.txt']


def test_missing_manifest(tmp_path):
    """A directory without a manifest cannot be verified."""
    with pytest.raises(IntegrityError):
        load_manifest(tmp_path)


def test_rerun_replaces_stale_manifest(tmp_path):
    """Re-opening a run directory drops the previous manifest until finalize."""
    rd = RunDirectory(tmp_path, 'flow', 'ef' * 32, 1)
    rd.finalize()
    again = RunDirectory(tmp_path, 'flow', 'ef' * 32, 1)
    with pytest.raises(IntegrityError):
        load_manifest(again.path)
