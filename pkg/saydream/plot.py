"""
Plots of training logs and denoise-step ablations. Needs the optional
``plot`` extra (matplotlib).
"""
import json
from typing import Any, Dict, List, Optional, Sequence
from saydream.errors import DatasetError


def _pyplot():
    import matplotlib
    matplotlib.use('Agg')
    from matplotlib import pyplot as plt  # type: ignore
    return plt


def read_log(path: str) -> List[Dict[str, Any]]:
    """Read a JSON-lines training log."""
    try:
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))


def plot_losses(log_path: str, out_path: str,
                keys: Optional[Sequence[str]] = None) -> None:
    """One curve per loss component of a training log, log-scaled."""
    records = read_log(log_path)
    if (len(records) == 0):
        raise DatasetError(log_path, 'empty log')
    if (keys is None):
        keys = [k for k in records[0] if k not in ('step', 'lr')]
    plt = _pyplot()
    fig, ax = plt.subplots()
    steps = [r['step'] for r in records]
    for key in keys:
        ax.plot(steps, [r[key] for r in records], label=key)
    ax.set_xlabel('step')
    ax.set_ylabel('loss')
    ax.set_yscale('symlog', linthresh=1e-3)
    ax.legend()
    fig.savefig(out_path)
    plt.close(fig)


def plot_ablation(rows: Sequence[Dict[str, Any]], out_path: str) -> None:
    """SSIM and PSNR against the number of denoising steps."""
    plt = _pyplot()
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
    steps = [r['steps'] for r in rows]
    left.plot(steps, [r['ssim'] for r in rows], marker='o')
    left.set_xlabel('denoise steps')
    left.set_ylabel('SSIM')
    right.plot(steps, [r['psnr'] for r in rows], marker='o')
    right.set_xlabel('denoise steps')
    right.set_ylabel('PSNR (dB)')
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
