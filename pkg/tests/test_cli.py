"""
Pruebas de la línea de comandos: artefactos, determinismo y códigos de salida.
"""

import json
import os

import pandas as pd
import pytest
from click.testing import CliRunner

from src.app import cli
from src.data_processing.checkpoint import read_checkpoint
from src.utils.utils import TOOL_VERSION

SINE_PARAMS = {
    'phi': [{'index': [1], 'amplitude': 0.5}, {'index': [2], 'amplitude': [0.2, 0.1]}],
    'psi0': [{'index': [1], 'amplitude': 0.3}],
    'psi1': [{'index': [2], 'amplitude': 0.1}],
}


def _payload(**overrides):
    payload = {
        'grid': {'dim': 1, 'modes': [16]},
        'data': {'family': 'sine', 'params': SINE_PARAMS},
        'integrator': {'dt': 1e-3},
        'n': 8,
        'horizon': 0.01,
        'sample_every': 5,
    }
    payload.update(overrides)
    return payload


@pytest.fixture
def invoke():
    runner = CliRunner()

    def _invoke(*args):
        return runner.invoke(cli, list(args))
    return _invoke


def _read(path):
    with open(path, 'rb') as f:
        return f.read()


class TestRun:
    """Subcomando run."""

    def test_zero_horizon(self, invoke, write_config, tmp_path):
        out = tmp_path / 'out'
        result = invoke('run', '--config', write_config(_payload(horizon=0.0)), '--out', str(out))
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out / 'observables.csv')
        assert len(frame) == 1
        assert frame['t'].iloc[0] == 0.0
        assert (out / 'manifest.json').exists()

    def test_artifacts_and_summary(self, invoke, write_config, tmp_path):
        out = tmp_path / 'out'
        result = invoke('run', '--config', write_config(_payload()), '--out', str(out))
        assert result.exit_code == 0, result.output
        for name in ('observables.csv', 'summary.json', 'conservation.html', 'norms.html', 'envelope.html'):
            assert (out / name).exists()
        with open(out / 'summary.json', encoding='utf-8') as f:
            summary = json.load(f)
        assert summary['samples'] == 3
        assert summary['n'] == '8'
        assert summary['drift']['Q_drift'] < 1e-9

    def test_rerun_is_byte_identical(self, invoke, write_config, tmp_path):
        config = write_config(_payload())
        for name in ('a', 'b'):
            assert invoke('run', '--config', config, '--out', str(tmp_path / name)).exit_code == 0
        for artifact in ('observables.csv', 'summary.json'):
            assert _read(tmp_path / 'a' / artifact) == _read(tmp_path / 'b' / artifact)

    def test_threads_do_not_change_results(self, invoke, write_config, tmp_path):
        config = write_config(_payload())
        assert invoke('run', '--config', config, '--out', str(tmp_path / 'one'), '--threads', '1').exit_code == 0
        assert invoke('run', '--config', config, '--out', str(tmp_path / 'two'), '--threads', '2').exit_code == 0
        assert _read(tmp_path / 'one' / 'observables.csv') == _read(tmp_path / 'two' / 'observables.csv')

    def test_resume_from_checkpoint(self, invoke, write_config, tmp_path):
        config = write_config(_payload(horizon=0.02, checkpoint_every=1))
        full = tmp_path / 'full'
        assert invoke('run', '--config', config, '--out', str(full)).exit_code == 0
        checkpoint = full / 'checkpoints' / 'checkpoint_000002.kgs'
        assert checkpoint.exists()
        resumed = tmp_path / 'resumed'
        result = invoke('run', '--config', config, '--out', str(resumed), '--resume', str(checkpoint))
        assert result.exit_code == 0, result.output
        last_full = pd.read_csv(full / 'observables.csv').iloc[-1]
        last_resumed = pd.read_csv(resumed / 'observables.csv').iloc[-1]
        assert last_resumed['t'] == pytest.approx(0.02)
        for column in last_full.index.drop('t'):
            assert last_resumed[column] == pytest.approx(last_full[column], rel=1e-12, abs=1e-15)

    def test_resume_in_place_continues_numbering(self, invoke, write_config, tmp_path):
        out = tmp_path / 'out'
        short = write_config(_payload(horizon=0.01, checkpoint_every=1), 'short.json')
        assert invoke('run', '--config', short, '--out', str(out)).exit_code == 0
        checkpoints = out / 'checkpoints'
        assert sorted(p.name for p in checkpoints.iterdir()) == ['checkpoint_000001.kgs', 'checkpoint_000002.kgs']
        before = (checkpoints / 'checkpoint_000002.kgs').read_bytes()
        longer = write_config(_payload(horizon=0.02, checkpoint_every=1), 'long.json')
        result = invoke('run', '--config', longer, '--out', str(out),
                        '--resume', str(checkpoints / 'checkpoint_000002.kgs'))
        assert result.exit_code == 0, result.output
        assert sorted(p.name for p in checkpoints.iterdir()) == [f'checkpoint_00000{i}.kgs' for i in range(1, 5)]
        assert (checkpoints / 'checkpoint_000002.kgs').read_bytes() == before
        state, _ = read_checkpoint(str(checkpoints / 'checkpoint_000004.kgs'))
        assert state.t == pytest.approx(0.02)
        frame = pd.read_csv(out / 'observables.csv')
        assert frame['t'].tolist() == pytest.approx([0.0, 0.005, 0.01, 0.015, 0.02])

    def test_resume_on_other_grid(self, invoke, write_config, tmp_path):
        config = write_config(_payload(horizon=0.02, checkpoint_every=1), 'small.json')
        assert invoke('run', '--config', config, '--out', str(tmp_path / 'full')).exit_code == 0
        checkpoint = tmp_path / 'full' / 'checkpoints' / 'checkpoint_000001.kgs'
        other = write_config(_payload(grid={'dim': 1, 'modes': [32]}), 'large.json')
        result = invoke('run', '--config', other, '--out', str(tmp_path / 'other'), '--resume', str(checkpoint))
        assert result.exit_code == 1
        assert 'malla' in result.output

    def test_blow_up(self, invoke, write_config, tmp_path):
        params = {'phi': [{'index': [1], 'amplitude': 1e13}]}
        payload = _payload(data={'family': 'sine', 'params': params}, integrator={'dt': 1e-3, 'coupling': 0.0})
        out = tmp_path / 'out'
        result = invoke('run', '--config', write_config(payload), '--out', str(out))
        assert result.exit_code == 2
        assert len(pd.read_csv(out / 'observables.csv')) == 1
        with open(out / 'summary.json', encoding='utf-8') as f:
            assert json.load(f)['blow_up_time'] == pytest.approx(1e-3)


class TestValidation:
    """Errores de validación: código 1."""

    def test_invalid_dimension(self, invoke, write_config, tmp_path):
        result = invoke('run', '--config', write_config(_payload(grid={'dim': 4})), '--out', str(tmp_path))
        assert result.exit_code == 1
        assert 'grid.dim' in result.output

    def test_single_level_family(self, invoke, write_config, tmp_path):
        result = invoke('converge', '--config', write_config(_payload(n_list=[8])), '--out', str(tmp_path))
        assert result.exit_code == 1
        assert 'al menos 3' in result.output

    def test_empty_suites(self, invoke, write_config, tmp_path):
        result = invoke('verify', '--config', write_config(_payload(verify={'suites': []})), '--out', str(tmp_path))
        assert result.exit_code == 1
        assert 'verify.suites' in result.output

    def test_missing_config(self, invoke, tmp_path):
        result = invoke('run', '--config', str(tmp_path / 'missing.json'), '--out', str(tmp_path))
        assert result.exit_code == 1

    def test_version(self, invoke):
        result = invoke('--version')
        assert result.exit_code == 0
        assert TOOL_VERSION in result.output


class TestConverge:
    """Subcomando converge."""

    def test_report(self, invoke, write_config, tmp_path):
        config = write_config(_payload(n_list=[4, 8, 16], horizon=0.02, rate_threshold=0.0))
        out = tmp_path / 'out'
        result = invoke('converge', '--config', config, '--out', str(out))
        assert result.exit_code == 0, result.output
        diffs = pd.read_csv(out / 'diffs.csv')
        assert list(diffs['m']) == [4.0, 8.0]
        with open(out / 'convergence.json', encoding='utf-8') as f:
            report = json.load(f)
        assert report['passed'] is True
        assert report['limit']['reference_n'] == 'inf'
        assert report['report']['rate_l2']['rate'] > 0

    def test_threads_do_not_change_report(self, invoke, write_config, tmp_path):
        config = write_config(_payload(n_list=[4, 8, 16], horizon=0.02, rate_threshold=0.0))
        for threads in ('1', '4'):
            assert invoke('converge', '--config', config, '--out', str(tmp_path / threads),
                          '--threads', threads).exit_code == 0
        assert _read(tmp_path / '1' / 'diffs.csv') == _read(tmp_path / '4' / 'diffs.csv')


class TestVerify:
    """Subcomando verify."""

    def test_fault_injection_fails(self, invoke, write_config, tmp_path):
        verify = {'suites': ['yosida'], 'fault_injection': 1e-3, 'property_samples': 2}
        out = tmp_path / 'out'
        result = invoke('verify', '--config', write_config(_payload(verify=verify)), '--out', str(out))
        assert result.exit_code == 3
        with open(out / 'verify.json', encoding='utf-8') as f:
            content = json.load(f)
        assert content['passed'] is False
        assert content['suites']['yosida']['details']['N1']['checks']['contraction']['violations'] > 0
        assert content['suites']['yosida']['details']['N2']['passed'] is False

    def test_yosida_covers_both_dimensions(self, invoke, write_config, tmp_path):
        out = tmp_path / 'out'
        result = invoke('verify', '--config', write_config(_payload(verify={'suites': ['yosida']})), '--out', str(out))
        assert result.exit_code == 0, result.output
        with open(out / 'verify.json', encoding='utf-8') as f:
            details = json.load(f)['suites']['yosida']['details']
        for key in ('N1', 'N2'):
            assert details[key]['passed'] is True
            assert details[key]['samples'] == 1000

    def test_conservation_suite(self, invoke, write_config, tmp_path):
        payload = _payload(horizon=0.05, verify={'suites': ['conservation']})
        result = invoke('verify', '--config', write_config(payload), '--out', str(tmp_path))
        assert result.exit_code == 0, result.output


class TestOracle:
    """Subcomando oracle."""

    def test_linear_flow(self, invoke, write_config, tmp_path):
        payload = _payload(integrator={'dt': 1e-3, 'coupling': 0.0}, oracle={'horizon': 0.05, 'dt': 1e-2})
        result = invoke('oracle', '--config', write_config(payload), '--out', str(tmp_path))
        assert result.exit_code == 0, result.output
        with open(os.path.join(tmp_path, 'oracle.json'), encoding='utf-8') as f:
            content = json.load(f)
        assert content['sweeps'] == 1
        assert content['agreement'] <= 1e-10

    def test_oversized_horizon(self, invoke, write_config, tmp_path):
        payload = _payload(n='inf', integrator={'dt': 1e-3, 'coupling': 300.0},
                           oracle={'horizon': 2.0, 'dt': 1e-2, 'max_sweeps': 30})
        result = invoke('oracle', '--config', write_config(payload), '--out', str(tmp_path))
        assert result.exit_code == 2
        assert 'Fallo numérico' in result.output
