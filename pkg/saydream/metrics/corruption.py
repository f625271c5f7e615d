"""
Corruption harness: perturbed versions of an episode's video, each built to
break one scorer. States are rebuilt from the episode annotations and
re-rendered.
"""
from typing import Optional
import numpy as np
from saydream.sim.render import glyph_box, render
from saydream.sim.trajectory import Trajectory
from saydream.sim.world import Block, WorldState

SCRAMBLE_MARGIN = 4


def _video(traj: Trajectory, states) -> np.ndarray:
    height, width = traj.frames.shape[1:3]
    return np.stack([render(s, height, width) for s in states])


def scramble_gripper(traj: Trajectory, rng: np.random.Generator,
                     frame: Optional[int] = None) -> np.ndarray:
    """
    Shuffle the pixels around the gripper glyph of one frame (a random one
    unless `frame` is given).
    """
    frames = np.array(traj.frames, copy=True)
    height, width = frames.shape[1:3]
    t = int(rng.integers(0, len(frames))) if frame is None else frame
    gx, gy = traj.gripper_path()[t]
    r0, c0, r1, c1 = glyph_box(float(gx), float(gy), height, width,
                               SCRAMBLE_MARGIN)
    patch = frames[t, r0:r1 + 1, c0:c1 + 1].reshape(-1, 3)
    frames[t, r0:r1 + 1, c0:c1 + 1] = rng.permutation(patch).reshape(
        r1 - r0 + 1, c1 - c0 + 1, 3)
    return frames


def teleport_target(traj: Trajectory, frame: int = 1) -> np.ndarray:
    """
    From `frame` on, the target sits under the gripper: it jumps there while
    the gripper is still far away and then moves along.
    """
    target = traj.target_id()
    states = []
    for t in range(traj.length + 1):
        state = traj.state_at(t)
        if (t >= frame):
            block = state.block(target)
            block.x, block.y = state.gripper
        states.append(state)
    return _video(traj, states)


def swap_target(traj: Trajectory,
                distractor: Optional[int] = None) -> np.ndarray:
    """
    The episode with the target and a distractor exchanging colors, so a
    distractor is the block that ends up in the box.
    """
    target = traj.target_id()
    other = distractor if distractor is not None else \
        next(i for i in range(len(traj.block_colors)) if i != target)
    colors = list(traj.block_colors)
    colors[target], colors[other] = colors[other], colors[target]
    states = []
    for t in range(traj.length + 1):
        state = traj.state_at(t)
        blocks = [Block(b.id, colors[b.id], b.x, b.y) for b in state.blocks]
        states.append(WorldState(state.gripper, state.gripper_open,
                                 state.held, blocks, state.box_region,
                                 state.step_count))
    return _video(traj, states)

