"""
The metrics report: one row per scored video, the aggregates over all rows,
clip-quality statistics, and the config echo and input hashes of the run.

JSON layout::

    {"rows": [{"video": str, "target": str, "ec_case": "I"|"II"|"III",
               "coverage": float, "flags": [str], <metric key>: value}],
     "aggregates": {<metric key>: float},   # rates in %, "ec" as a mean
     "quality": {"ssim_mean", "ssim_sd", "psnr_mean", "psnr_sd": float,
                 "ffd": float|null, "ffd_jitter": bool} | null,
     "config": {...}, "hashes": {name: sha1}, "flags": [str]}
"""
import inspect
import json
import logging
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple
import numpy as np
from recordclass import RecordClass
from saydream import metrics
from saydream.config import EvalConfig
from saydream.errors import DatasetError, warning
from saydream.metrics.detect import coverage, detect_video
from saydream.metrics.embodiment import embodiment_consistency
from saydream.metrics.frechet import frechet_feature_distance
from saydream.metrics.metric_decorator import RATE
from saydream.metrics.quality import clip_scores
from saydream.sim.world import TaskSpec

logger = logging.getLogger(__name__)


class MetricsReport(RecordClass):
    rows: List[Dict[str, Any]]
    aggregates: Dict[str, float]
    quality: Optional[Dict[str, Any]]
    config: Dict[str, Any]
    hashes: Dict[str, str]
    flags: List[str]


def score_video(frames: np.ndarray, task: TaskSpec,
                config: Optional[EvalConfig] = None,
                name: str = '') -> Dict[str, Any]:
    """Detect the entities of every frame and apply every registered
    metric."""
    config = config if config is not None else EvalConfig()
    detections = detect_video(frames, config.detect_min)
    case, _ = embodiment_consistency([d.gripper_score for d in detections],
                                     config.theta_high, config.theta_low)
    cover = coverage(detections)
    row: Dict[str, Any] = {'video': name,
                           'target': task.target_color.label(),
                           'ec_case': case, 'coverage': cover, 'flags': []}
    if (cover < config.coverage):
        row['flags'].append('low-coverage')
    for key in sorted(metrics.registry):
        value = metrics.registry[key](detections=detections, task=task,
                                      config=config)
        row[key] = value if isinstance(value, bool) else float(value)
    return row


def _score_job(args: Tuple) -> Dict[str, Any]:
    return score_video(*args)


def score_videos(videos: Sequence[np.ndarray], tasks: Sequence[TaskSpec],
                 config: Optional[EvalConfig] = None,
                 names: Optional[Sequence[str]] = None,
                 workers: int = 1) -> List[Dict[str, Any]]:
    config = config if config is not None else EvalConfig()
    names = names if names is not None else \
        [f'video{i:04d}' for i in range(len(videos))]
    jobs = list(zip(videos, tasks, [config] * len(videos), names))
    if (workers > 1):
        with Pool(processes=workers) as pool:
            return pool.map(_score_job, jobs)
    return [_score_job(job) for job in jobs]


def aggregate(rows: Sequence[Dict[str, Any]]) -> Dict[str, float]:
    """Rates (in %) for yes/no metrics, means for scores."""
    out: Dict[str, float] = {}
    if (len(rows) == 0):
        return out
    for key in sorted(metrics.registry):
        values = [row[key] for row in rows]
        fn = inspect.unwrap(metrics.registry[key])
        if (getattr(fn, '__aggregate__', RATE) == RATE):
            out[key] = 100.0 * sum(bool(v) for v in values) / len(values)
        else:
            out[key] = float(np.mean(values))
    return out


def quality_summary(generated: np.ndarray, truth: np.ndarray,
                    config: Optional[EvalConfig] = None) -> Dict[str, Any]:
    """SSIM and PSNR statistics and FFD of generated clips against their
    ground-truth clips."""
    config = config if config is not None else EvalConfig()
    scores = clip_scores(generated, truth)
    out: Dict[str, Any] = {
        'ssim_mean': float(scores[:, 0].mean()),
        'ssim_sd': float(scores[:, 0].std()),
        'psnr_mean': float(scores[:, 1].mean()),
        'psnr_sd': float(scores[:, 1].std()),
        'ffd': None, 'ffd_jitter': False}
    if (len(generated) >= 2):
        ffd, jitter = frechet_feature_distance(generated, truth,
                                               config.ffd_seed,
                                               config.ffd_dims)
        out['ffd'], out['ffd_jitter'] = ffd, jitter
        if (jitter):
            warning('FFD: singular covariance, jitter added')
    return out


def build_report(rows: List[Dict[str, Any]], config: Dict[str, Any],
                 hashes: Optional[Dict[str, str]] = None,
                 quality: Optional[Dict[str, Any]] = None) -> MetricsReport:
    flags = sorted({f for row in rows for f in row['flags']})
    if (quality is not None and quality.get('ffd_jitter')):
        flags.append('ffd-jitter')
    report = MetricsReport(rows, aggregate(rows), quality, config,
                           dict(hashes or {}), flags)
    for key, value in report.aggregates.items():
        logger.info('%s: %.3f', key, value)
    return report


def report_dict(report: MetricsReport) -> Dict[str, Any]:
    return dict(zip(MetricsReport.__fields__, report))


def write_report(path: str, report: MetricsReport) -> None:
    """
    Raises:
      DatasetError: if `path` cannot be written.
    """
    try:
        with open(path, 'w') as fh:
            json.dump(report_dict(report), fh, indent=2, sort_keys=True)
            fh.write('\n')
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))


def read_report(path: str) -> MetricsReport:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))
    except json.JSONDecodeError as e:
        raise DatasetError(path, f'not a metrics report ({e})')
    return MetricsReport(*(data[f] for f in MetricsReport.__fields__))
