import math
from typing import Tuple
from saydream.sim.trajectory import Trajectory, collect
from saydream.sim.world import Action, TaskSpec, WorldState

EXPERT_SPEED = 0.02
ARRIVED = 1e-9


def _toward(src: Tuple[float, float], dst: Tuple[float, float],
            speed: float) -> Tuple[float, float]:
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    d = math.hypot(dx, dy)
    if (d <= speed):
        return dx, dy
    return dx * speed / d, dy * speed / d


def box_center(state: WorldState) -> Tuple[float, float]:
    x0, y0, x1, y1 = state.box_region
    return (x0 + x1) / 2, (y0 + y1) / 2


def scripted_expert(state: WorldState, task: TaskSpec) -> Action:
    """
    Waypoint policy: approach the target with open fingers, close on it,
    carry it to the box center and open.
    """
    target = state.block_of_color(task.target_color)
    gripper = state.gripper
    if (state.held == target.id):
        center = box_center(state)
        if (math.dist(gripper, center) > ARRIVED):
            return Action(*_toward(gripper, center, EXPERT_SPEED), 1.0)
        return Action(0.0, 0.0, 0.0)
    if (state.held is not None):
        return Action(0.0, 0.0, 0.0)
    goal = (target.x, target.y)
    if (math.dist(gripper, goal) > ARRIVED):
        return Action(*_toward(gripper, goal, EXPERT_SPEED), 0.0)
    return Action(0.0, 0.0, 1.0)


def run_expert(task: TaskSpec, height: int = 32,
               width: int = 32) -> Trajectory:
    """Record one expert episode of `task`."""
    return collect(task, lambda s: scripted_expert(s, task), height, width)
