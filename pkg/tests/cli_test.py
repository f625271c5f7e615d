import json
import os
import runpy
import sys
from argparse import ArgumentTypeError
from pytest import fixture, raises
from saydream.args import check_file, step_list
from saydream.main import main
from saydream.metrics.report import read_report
from saydream.plot import read_log
from saydream.policy.rollout import read_episode
from tests.helper import tiny_config


def _run(*argv):
    assert main(list(argv)) == 0


@fixture
def workdir(tmp_path):
    config = str(tmp_path / 'exp.json')
    tiny_config(seed=3).dump(config)
    return config, str(tmp_path / 'run')


def test_no_command_is_a_usage_error():
    with raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


def test_missing_config_is_a_usage_error(tmp_path):
    with raises(SystemExit) as err:
        main(['gen-data', '--config', str(tmp_path / 'none.json')])
    assert err.value.code == 2


def test_missing_artifacts_are_runtime_errors(workdir, capsys):
    config, out = workdir
    with raises(SystemExit) as err:
        main(['train-codec', '--config', config, '--out', out])
    assert err.value.code == 3
    assert 'ERROR' in capsys.readouterr().err


def test_step_lists():
    assert step_list('1,2, 8') == (1, 2, 8)
    for text in ('', '0,2', 'a'):
        with raises(ArgumentTypeError):
            step_list(text)
    with raises(ArgumentTypeError):
        check_file('/definitely/not/here')


def test_datasets_are_reproducible(workdir, tmp_path):
    config, out = workdir
    other = str(tmp_path / 'again')
    _run('gen-data', '--config', config, '--out', out)
    _run('gen-data', '--config', config, '--out', other)
    with open(os.path.join(out, 'dataset.sdds'), 'rb') as fh:
        first = fh.read()
    with open(os.path.join(other, 'dataset.sdds'), 'rb') as fh:
        assert fh.read() == first
    _run('gen-data', '--config', config, '--out', other, '--seed', '4')
    with open(os.path.join(other, 'dataset.sdds'), 'rb') as fh:
        assert fh.read() != first
    with open(os.path.join(out, 'dataset.sdds.json')) as fh:
        assert json.load(fh)['config']['seed'] == 3


def test_full_pipeline(workdir, capsys):
    config, out = workdir
    common = ['--config', config, '--out', out]
    _run('gen-data', *common)
    _run('train-codec', *common)
    _run('train-teacher', *common)
    _run('train-teacher', '--resume', *common)
    log = read_log(os.path.join(out, 'teacher_log.jsonl'))
    assert [r['step'] for r in log] == [1, 2, 3]
    _run('distill', *common)
    _run('train-policy', *common)
    _run('rollout', *common)
    assert 'rollout: 2 episodes' in capsys.readouterr().out
    with open(os.path.join(out, 'rollouts', 'summary.json')) as fh:
        summary = json.load(fh)
    assert summary['episodes'] == 2 and not summary['wrong_dream']
    assert set(summary['inputs']) == {'policy.ckpt', 'student.ckpt',
                                      'codec.ckpt'}
    record = read_episode(os.path.join(out, 'rollouts', 'episode_0000.sdep'))
    assert record.clip.frames.shape == (4, 16, 16, 3)
    assert record.meta['sampler']['world_model'] == 'student'

    for source in ('dream', 'expert', 'rollout'):
        _run('evaluate', '--source', source, *common)
        report = read_report(os.path.join(out, 'report.json'))
        assert len(report.rows) == 2
        assert sorted(report.aggregates) == ['ec', 'isr', 'rsr', 'tcr']
        assert (report.quality is not None) == (source == 'dream')

    _run('ablate-steps', '--steps', '1,2', *common)
    with open(os.path.join(out, 'ablation.json')) as fh:
        rows = json.load(fh)['rows']
    assert [r['steps'] for r in rows] == [1, 2]

    _run('export-video', *common)
    assert 'export-video: 5 files' in capsys.readouterr().out
    _run('export-video', '--executed', '--no-gif', *common)
    names = os.listdir(os.path.join(out, 'video'))
    assert 'imagined.gif' in names and 'executed_000.ppm' in names
    assert 'executed.gif' not in names

    _run('rollout', '--wrong-dream', *common)
    with open(os.path.join(out, 'rollouts', 'summary.json')) as fh:
        assert json.load(fh)['wrong_dream']


def test_module_entry_point_exits_with_the_status(workdir, monkeypatch):
    config, out = workdir
    monkeypatch.setattr(sys, 'argv', ['saydream', 'gen-data', '--config',
                                      config, '--out', out])
    with raises(SystemExit) as err:
        runpy.run_module('saydream', run_name='__main__')
    assert err.value.code == 0
    assert os.path.exists(os.path.join(out, 'dataset.sdds'))
