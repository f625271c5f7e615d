from __future__ import annotations
from typing import Callable, List, Optional, Tuple
import numpy as np
from saydream.errors import ShapeError
from saydream.sim.render import render
from saydream.sim.world import (Action, Block, Color, TaskSpec, WorldState,
                                in_region, reset, step, success)

# annotation row: gripper x, gripper y, open flag, held id (-1 when none),
# then x, y of every block in id order
ANNOTATION_HEAD = 4


def annotate(state: WorldState) -> np.ndarray:
    row = [state.gripper[0], state.gripper[1],
           1.0 if state.gripper_open else 0.0,
           -1.0 if state.held is None else float(state.held)]
    for b in sorted(state.blocks, key=lambda b: b.id):
        row.extend([b.x, b.y])
    return np.array(row, dtype=np.float64)


class Trajectory:
    """
    One episode: T + 1 frames, T actions as rows (dx, dy, grip), and one
    annotation row per frame.
    """
    def __init__(self, task: TaskSpec, block_colors: List[Color],
                 box_region: Tuple[float, float, float, float],
                 frames: np.ndarray, actions: np.ndarray,
                 annotations: np.ndarray):
        if (len(frames) != len(actions) + 1):
            raise ShapeError('Trajectory', frames.shape, actions.shape,
                             'need one more frame than actions')
        if (len(annotations) != len(frames)):
            raise ShapeError('Trajectory', frames.shape, annotations.shape,
                             'annotations must align with frames')
        self.task = task
        self.block_colors = list(block_colors)
        self.box_region = tuple(box_region)
        self.frames = frames
        self.actions = actions
        self.annotations = annotations

    @property
    def length(self) -> int:
        return len(self.actions)

    def gripper_path(self) -> np.ndarray:
        return self.annotations[:, 0:2]

    def block_path(self, block_id: int) -> np.ndarray:
        col = ANNOTATION_HEAD + 2 * block_id
        return self.annotations[:, col:col + 2]

    def target_id(self) -> int:
        return self.block_colors.index(self.task.target_color)

    def target_path(self) -> np.ndarray:
        return self.block_path(self.target_id())

    def state_at(self, t: int) -> WorldState:
        """Rebuild the simulator state of frame `t` from its annotations."""
        row = self.annotations[t]
        held = int(row[3])
        blocks = [Block(i, c, float(row[ANNOTATION_HEAD + 2 * i]),
                        float(row[ANNOTATION_HEAD + 2 * i + 1]))
                  for i, c in enumerate(self.block_colors)]
        return WorldState((float(row[0]), float(row[1])), bool(row[2] > 0.5),
                          None if held < 0 else held, blocks,
                          self.box_region, t)

    def success(self) -> bool:
        final = self.annotations[-1]
        tx, ty = self.target_path()[-1]
        return (int(final[3]) != self.target_id() and
                in_region(float(tx), float(ty), self.box_region))

    def quantized(self) -> Trajectory:
        """
        The trajectory as it reads back from a dataset file: frames on the
        8-bit grid, actions and annotations in 32-bit precision.
        """
        frames = np.round(np.clip(self.frames, 0.0, 1.0) * 255.0) / 255.0
        box = tuple(float(np.float32(b)) for b in self.box_region)
        return Trajectory(self.task, self.block_colors, box, frames,
                          self.actions.astype(np.float32).astype(np.float64),
                          self.annotations.astype(np.float32).astype(
                              np.float64))


Controller = Callable[[WorldState], Action]


def collect(task: TaskSpec, controller: Controller, height: int = 32,
            width: int = 32,
            state: Optional[WorldState] = None) -> Trajectory:
    """
    Run `controller` from the reset state of `task` until success or the
    step limit, rendering every visited state.
    """
    state = reset(task) if state is None else state
    frames = [render(state, height, width)]
    annotations = [annotate(state)]
    actions = []
    while (not success(state, task) and state.step_count < task.max_steps):
        action = controller(state).clamped()
        state = step(state, action)
        actions.append(tuple(action))
        frames.append(render(state, height, width))
        annotations.append(annotate(state))
    colors = [b.color for b in sorted(state.blocks, key=lambda b: b.id)]
    return Trajectory(task, colors, state.box_region, np.stack(frames),
                      np.array(actions, dtype=np.float64).reshape(-1, 3),
                      np.stack(annotations))
