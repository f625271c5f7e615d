import json
import os
from pytest import importorskip, raises
from saydream.errors import DatasetError
from saydream.plot import plot_ablation, plot_losses, read_log


def _log(path, records):
    with open(path, 'w') as fh:
        for r in records:
            fh.write(json.dumps(r) + '\n')
        fh.write('\n')


def test_read_log(tmp_path):
    path = str(tmp_path / 'log.jsonl')
    _log(path, [{'step': 1, 'loss': 0.5}, {'step': 2, 'loss': 0.25}])
    assert read_log(path) == [{'step': 1, 'loss': 0.5},
                              {'step': 2, 'loss': 0.25}]
    with raises(DatasetError):
        read_log(str(tmp_path / 'none.jsonl'))


def test_plots_are_written(tmp_path):
    importorskip('matplotlib')
    log = str(tmp_path / 'log.jsonl')
    _log(log, [{'step': s, 'loss': 1.0 / s, 'lr': 1e-3} for s in (1, 2, 3)])
    plot_losses(log, str(tmp_path / 'loss.png'))
    plot_ablation([{'steps': 1, 'ssim': 0.4, 'psnr': 12.0},
                   {'steps': 4, 'ssim': 0.6, 'psnr': 15.0}],
                  str(tmp_path / 'ablation.png'))
    assert os.path.getsize(tmp_path / 'loss.png') > 0
    assert os.path.getsize(tmp_path / 'ablation.png') > 0


def test_empty_logs_are_not_plotted(tmp_path):
    log = str(tmp_path / 'log.jsonl')
    _log(log, [])
    with raises(DatasetError):
        plot_losses(log, str(tmp_path / 'loss.png'))
    assert not os.path.exists(tmp_path / 'loss.png')
