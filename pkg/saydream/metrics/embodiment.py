from typing import Optional, Sequence, Tuple
import numpy as np
from saydream.config import EvalConfig
from saydream.metrics.detect import EntityDetection
from saydream.metrics.metric_decorator import MEAN, metric
from saydream.sim.world import TaskSpec

CASE_SCORES = {'I': 3, 'II': 2, 'III': 1}


def embodiment_consistency(scores: Sequence[float], theta_high: float = 0.9,
                           theta_low: float = 0.7) -> Tuple[str, int]:
    """
    Case I (score 3) when the gripper matches its template in every frame
    with at least `theta_high`, case II (score 2) with at least `theta_low`,
    case III (score 1) otherwise.

    Raises:
      ValueError: for an empty video.
    """
    if (len(scores) == 0):
        raise ValueError('embodiment consistency of an empty video')
    worst = min(scores)
    if (worst >= theta_high):
        case = 'I'
    elif (worst >= theta_low):
        case = 'II'
    else:
        case = 'III'
    return case, CASE_SCORES[case]


def ec_aggregate(scores: Sequence[int]) -> float:
    """EC: the mean per-video score."""
    if (len(scores) == 0):
        raise ValueError('no videos to aggregate')
    return float(np.mean(scores))


@metric('EC', 'embodiment consistency score (3/2/1)', 'ec', MEAN)
def ec(detections: Sequence[EntityDetection], task: TaskSpec,
       config: Optional[EvalConfig] = None) -> int:
    config = config if config is not None else EvalConfig()
    _, score = embodiment_consistency([d.gripper_score for d in detections],
                                      config.theta_high, config.theta_low)
    return score
