"""
Automated referring, interaction and task-completion judgments over the
per-frame detections of a video. Distances are measured in pixels; the
contact radius is the grasp radius in pixels plus a detection tolerance.
"""
import math
from typing import List, Optional, Sequence
import numpy as np
from saydream.config import EvalConfig
from saydream.metrics.detect import (EntityDetection, Point, coverage,
                                     detect_video)
from saydream.metrics.metric_decorator import metric
from saydream.sim.world import TaskSpec

# target displacement beyond the gripper's (pixels) that counts as moving
# on its own
JUMP_PIXELS = 2.0
# centroid change (pixels) that counts as moving
MOVE_PIXELS = 0.25


def _pixels(point: Optional[Point],
            det: EntityDetection) -> Optional[np.ndarray]:
    if (point is None):
        return None
    height, width = det.frame_size
    return np.array([point[0] * width, point[1] * height])


def _dist(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> float:
    if (a is None or b is None):
        return math.inf
    return float(np.linalg.norm(a - b))


def contact_pixels(det: EntityDetection, config: EvalConfig) -> float:
    return config.contact_radius * max(det.frame_size) + \
        config.pixel_tolerance


def _detections(video: Optional[Sequence[np.ndarray]],
                detections: Optional[Sequence[EntityDetection]],
                config: EvalConfig) -> List[EntityDetection]:
    if (detections is None):
        if (video is None):
            raise ValueError('either a video or its detections are needed')
        detections = detect_video(video, config.detect_min)
    if (len(detections) == 0):
        raise ValueError('empty video')
    return list(detections)


def covered(detections: Sequence[EntityDetection],
            config: EvalConfig) -> bool:
    """The gripper is detected in enough frames to judge the video."""
    return coverage(detections) >= config.coverage


def _tracks(detections: Sequence[EntityDetection], task: TaskSpec):
    grip = [_pixels(d.gripper, d) for d in detections]
    target = [_pixels(d.blocks.get(task.target_color), d)
              for d in detections]
    return grip, target


def referring_success(video: Optional[Sequence[np.ndarray]], task: TaskSpec,
                      detections: Optional[Sequence[EntityDetection]] = None,
                      config: Optional[EvalConfig] = None) -> bool:
    """
    The gripper gets at least halfway (straight-line distance) to the
    commanded target: the smallest gripper-target distance is at most half
    of the distance in the first frame.
    """
    config = config if config is not None else EvalConfig()
    detections = _detections(video, detections, config)
    if (not covered(detections, config)):
        return False
    grip, target = _tracks(detections, task)
    start = _dist(grip[0], target[0])
    if (math.isinf(start)):
        return False
    return min(_dist(g, t) for g, t in zip(grip, target)) <= 0.5 * start


def interaction_failures(detections: Sequence[EntityDetection],
                         task: TaskSpec, config: EvalConfig) -> List[str]:
    """
    The failure conditions that fire on a video: "unnatural-motion" (the
    target, out of contact in the previous frame, moves more than 2 px
    farther than the gripper does), "no-contact" (the gripper never reaches
    the target) and "distorted" (a frame's gripper score falls below the low
    threshold).
    """
    grip, target = _tracks(detections, task)
    contact = contact_pixels(detections[0], config)
    failures = []
    for t in range(1, len(detections)):
        moved = _dist(target[t], target[t - 1])
        travelled = _dist(grip[t], grip[t - 1])
        if (not math.isinf(moved) and moved - travelled > JUMP_PIXELS and
                _dist(grip[t - 1], target[t - 1]) > contact):
            failures.append('unnatural-motion')
            break
    if (min(_dist(g, t) for g, t in zip(grip, target)) > contact):
        failures.append('no-contact')
    if (min(d.gripper_score for d in detections) < config.theta_low):
        failures.append('distorted')
    return failures


def comoving_frames(detections: Sequence[EntityDetection], task: TaskSpec,
                    config: EvalConfig) -> int:
    """Frames in which the target moves while in contact with the gripper."""
    grip, target = _tracks(detections, task)
    contact = contact_pixels(detections[0], config)
    count = 0
    for t in range(1, len(detections)):
        moved = _dist(target[t], target[t - 1])
        if (not math.isinf(moved) and moved > MOVE_PIXELS and
                _dist(grip[t], target[t]) <= contact):
            count += 1
    return count


def interaction_success(video: Optional[Sequence[np.ndarray]],
                        task: TaskSpec,
                        detections: Optional[Sequence[EntityDetection]] = None,
                        config: Optional[EvalConfig] = None) -> bool:
    config = config if config is not None else EvalConfig()
    detections = _detections(video, detections, config)
    if (not covered(detections, config)):
        return False
    if (len(interaction_failures(detections, task, config)) > 0):
        return False
    return comoving_frames(detections, task, config) >= config.comove_frames


def task_completion(video: Optional[Sequence[np.ndarray]], task: TaskSpec,
                    detections: Optional[Sequence[EntityDetection]] = None,
                    config: Optional[EvalConfig] = None) -> bool:
    """
    In the final frame the commanded target lies inside the box and the
    gripper does not hold it (fingers open, or out of contact).
    """
    config = config if config is not None else EvalConfig()
    detections = _detections(video, detections, config)
    final = detections[-1]
    target = final.blocks.get(task.target_color)
    if (target is None or final.box is None):
        return False
    x0, y0, x1, y1 = final.box
    if (not (x0 <= target[0] <= x1 and y0 <= target[1] <= y1)):
        return False
    if (final.gripper is None or final.gripper_open):
        return True
    return _dist(_pixels(final.gripper, final), _pixels(target, final)) > \
        contact_pixels(final, config)


@metric('RSR', 'referring success: the gripper gets halfway to the target',
        'rsr')
def rsr(detections: Sequence[EntityDetection], task: TaskSpec,
        config: Optional[EvalConfig] = None) -> bool:
    return referring_success(None, task, detections, config)


@metric('ISR', 'interaction success: the target is grasped and carried',
        'isr')
def isr(detections: Sequence[EntityDetection], task: TaskSpec,
        config: Optional[EvalConfig] = None) -> bool:
    return interaction_success(None, task, detections, config)


@metric('TCR', 'task completion: the target rests in the box', 'tcr')
def tcr(detections: Sequence[EntityDetection], task: TaskSpec,
        config: Optional[EvalConfig] = None) -> bool:
    return task_completion(None, task, detections, config)
