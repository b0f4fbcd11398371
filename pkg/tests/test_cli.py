import json

import numpy as np
import pytest

import qsw
from src.core import bilin, witness
from src.core.bilin import DensityMatrix
from src.utils import interchange, util


def run(capsys, *argv):
    code = qsw.main(['--config', 'quick'] + list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


def write_state(path, state):
    util.write_json(interchange.encode_state(state), str(path))
    return str(path)


def test_witness_isotropic(capsys):
    report = run_json(capsys, 'witness', 'isotropic', '--m', '3', '--k', '3')
    assert report['command'] == 'witness isotropic'
    assert report['witness']['k'] == 3
    assert report['witness']['provenance'] == 'isotropic'
    assert report['eigenvalues'][0] == pytest.approx(-0.5)
    assert report['optimizer']['restarts'] == 16
    assert report['witness']['certification']['restarts'] == 16
    assert report['witness']['certification']['min_value'] >= -1e-9


def test_emit_then_evaluate(capsys, tmp_path):
    state_path = str(tmp_path / 'iso.json')
    witness_path = str(tmp_path / 'w.json')
    assert qsw.main(['--config', 'quick', '--out', state_path, 'catalog', 'emit', 'isotropic',
                     '--param', 'p=1.0']) == 0
    assert qsw.main(['--config', 'quick', '--out', witness_path, 'witness', 'isotropic', '--m', '3',
                     '--k', '3']) == 0
    capsys.readouterr()

    report = run_json(capsys, 'witness', 'evaluate', '--witness', witness_path, '--state', state_path)
    assert report['value'] == pytest.approx(-0.5)
    assert report['detected']


def test_optimize_reads_witness_report(capsys, tmp_path):
    witness_path = str(tmp_path / 'w.json')
    assert qsw.main(['--config', 'quick', '--out', witness_path, 'witness', 'isotropic', '--m', '2',
                     '--k', '2']) == 0
    capsys.readouterr()

    report = run_json(capsys, 'witness', 'optimize', '--witness', witness_path)
    assert report['optimal']
    assert report['span_dim'] == 4


def test_classify_psi_plus(capsys, tmp_path):
    path = write_state(tmp_path / 'psi.json', DensityMatrix.from_pure(bilin.maximally_entangled(3)))
    capsys.readouterr()
    report = run_json(capsys, 'classify', path)
    assert (report['bounds']['lower'], report['bounds']['upper']) == (3, 3)
    assert report['bounds']['upper_certificate']['type'] == 'pure_state'
    assert not report['ppt']


def test_classify_maximally_mixed(capsys, tmp_path):
    path = str(tmp_path / 'mixed.json')
    assert qsw.main(['--config', 'quick', '--out', path, 'catalog', 'emit', 'isotropic', '--param', 'p=0.0']) == 0
    capsys.readouterr()
    report = run_json(capsys, 'classify', path)
    assert (report['bounds']['lower'], report['bounds']['upper']) == (1, 1)
    assert report['ppt']


def test_classify_tiles(capsys):
    report = run_json(capsys, 'classify', 'tiles')
    assert (report['bounds']['lower'], report['bounds']['upper']) == (2, 2)
    assert report['bounds']['lower_certificate']['value'] < 0


def test_classify_is_deterministic(capsys):
    _, first = run(capsys, '--seed', '11', 'classify', 'chessboard', '--k-max', '2')
    _, second = run(capsys, '--seed', '11', 'classify', 'chessboard', '--k-max', '2')
    assert first == second


def test_swapped_state_file(capsys, tmp_path):
    dims = bilin.BipartiteDims(2, 3)
    rho = DensityMatrix.from_pure(bilin.product_state([1, 0], [0, 1, 0], dims))
    swapped = bilin.swap_subsystems(rho.entries, 2, 3)
    path = tmp_path / 'swapped.json'
    path.write_text(json.dumps({'dims': [3, 2], 're': np.real(swapped).tolist(),
                                'im': np.imag(swapped).tolist()}))
    report = run_json(capsys, 'classify', str(path))
    assert report['dims'] == [2, 3]
    assert report['bounds']['upper'] == 1


def test_invalid_inputs_exit_2(capsys, tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"dims": [3, 3], "re": [[1, 0]]')
    assert run(capsys, 'classify', str(bad))[0] == 2

    wrong_shape = tmp_path / 'shape.json'
    wrong_shape.write_text(json.dumps({'dims': [2, 2], 're': [[1.0]], 'im': [[0.0]]}))
    assert run(capsys, 'classify', str(wrong_shape))[0] == 2

    assert run(capsys, 'classify', 'no_such_state')[0] == 2
    assert run(capsys, 'witness', 'isotropic', '--m', '3', '--k', '4')[0] == 2
    assert run(capsys, 'witness', 'evaluate', '--witness', str(tmp_path / 'missing.json'), '--state', 'tiles')[0] == 2


def test_failed_certification_exits_3(capsys, tmp_path):
    w = interchange.encode_witness(witness.isotropic_witness(3, 2))
    w['certification'] = {'min_value': -0.5, 'restarts': 4, 'seed': 0}
    path = tmp_path / 'w.json'
    path.write_text(json.dumps(w))
    assert run(capsys, 'witness', 'evaluate', '--witness', str(path), '--state', 'tiles')[0] == 3


def test_catalog_list(capsys):
    report = run_json(capsys, 'catalog', 'list')
    names = [entry['name'] for entry in report['entries']]
    assert names == ['tiles', 'chessboard', 'alpha', 'choi', 'horodecki', 'isotropic']


def test_conjecture_scan_is_deterministic(capsys):
    first = run_json(capsys, 'conjecture', 'scan')
    second = run_json(capsys, 'conjecture', 'scan')
    assert first == second

    rows = {row['family']: row for row in first['rows']}
    assert set(rows) == {'tiles', 'chessboard'}
    for row in rows.values():
        assert 'error' not in row
        assert row['ranks'] == [4, 4]
        assert row['schmidt2_certificate']
        assert row['witness_value'] < 0
