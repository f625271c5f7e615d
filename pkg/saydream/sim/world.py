"""
The 2-D tabletop: blocks of four colors, a box, and a kinematic two-finger
gripper. Coordinates are in the unit square with y growing downwards (the
raster's row direction).
"""
from __future__ import annotations
import math
from enum import Enum
from typing import List, Optional, Tuple
import numpy as np
from recordclass import RecordClass
from saydream.errors import LayoutError


class Color(Enum):
    """ A block color; the value is the serialized index """
    RED = 0
    BLUE = 1
    YELLOW = 2
    GREEN = 3

    @classmethod
    def parse(cls, name: str) -> Color:
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f'Unknown block color "{name}"')

    def label(self) -> str:
        return self.name.lower()


HOME = (0.5, 0.88)
BOX_REGION = (0.64, 0.08, 0.92, 0.36)
SPAWN_REGION = (0.08, 0.08, 0.56, 0.72)
BLOCK_HALF = 0.045
BLOCK_SIZE = 2 * BLOCK_HALF
GRASP_RADIUS = 0.04
STEP_BOUND = 0.05
MIN_HOME_DISTANCE = 0.15
LAYOUT_ATTEMPTS = 1000


class TaskSpec(RecordClass):
    """
    "Pick the <target_color> block and place it in the box".

    Args:
      target_color: The color of the block to move.
      num_distractors: The number of other blocks (1 to 3), all of colors
        distinct from the target and from each other.
      layout_seed: The seed the block layout is sampled from.
      max_steps: The episode step limit.
    """
    target_color: Color
    num_distractors: int = 1
    layout_seed: int = 0
    max_steps: int = 120


class Block(RecordClass):
    id: int
    color: Color
    x: float
    y: float


class Action(RecordClass):
    """
    A low-level action: gripper displacement and grip command (>= 0.5
    closes the fingers).
    """
    dx: float = 0.0
    dy: float = 0.0
    grip: float = 0.0

    def clamped(self) -> Action:
        if (not all(math.isfinite(v) for v in (self.dx, self.dy, self.grip))):
            raise ValueError(f'non-finite action {tuple(self)}')
        return Action(min(max(self.dx, -STEP_BOUND), STEP_BOUND),
                      min(max(self.dy, -STEP_BOUND), STEP_BOUND),
                      min(max(self.grip, 0.0), 1.0))

    def closes(self) -> bool:
        return self.grip >= 0.5


class WorldState:
    """
    The full state of the tabletop. States are treated as values: `step`
    returns a new state and never modifies its argument.
    """
    def __init__(self, gripper: Tuple[float, float], gripper_open: bool,
                 held: Optional[int], blocks: List[Block],
                 box_region: Tuple[float, float, float, float] = BOX_REGION,
                 step_count: int = 0):
        self.gripper = (float(gripper[0]), float(gripper[1]))
        self.gripper_open = gripper_open
        self.held = held
        self.blocks = blocks
        self.box_region = box_region
        self.step_count = step_count

    def copy(self) -> WorldState:
        return WorldState(self.gripper, self.gripper_open, self.held,
                          [Block(*tuple(b)) for b in self.blocks],
                          self.box_region, self.step_count)

    def block(self, block_id: int) -> Block:
        for b in self.blocks:
            if (b.id == block_id):
                return b
        raise KeyError(block_id)

    def block_of_color(self, color: Color) -> Block:
        for b in self.blocks:
            if (b.color == color):
                return b
        raise KeyError(color)

    def __eq__(self, other: object) -> bool:
        if (not isinstance(other, WorldState)):
            return NotImplemented
        return (self.gripper == other.gripper and
                self.gripper_open == other.gripper_open and
                self.held == other.held and
                [tuple(b) for b in self.blocks] ==
                [tuple(b) for b in other.blocks] and
                self.box_region == other.box_region and
                self.step_count == other.step_count)

    def __repr__(self) -> str:
        return (f'WorldState(gripper={self.gripper}, '
                f'open={self.gripper_open}, held={self.held}, '
                f'blocks={[tuple(b) for b in self.blocks]}, '
                f'step={self.step_count})')


def in_region(x: float, y: float,
              region: Tuple[float, float, float, float]) -> bool:
    return region[0] <= x <= region[2] and region[1] <= y <= region[3]


def _clip01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def reset(task: TaskSpec) -> WorldState:
    """
    Sample the block layout of `task` from its layout seed. Block 0 is the
    target; distractor colors are drawn without replacement from the other
    colors.

    Raises:
      LayoutError: if no valid layout is found within 1000 rejection samples.
    """
    if (not 1 <= task.num_distractors <= len(Color) - 1):
        raise LayoutError(f'invalid distractor count {task.num_distractors}')
    rng = np.random.default_rng(task.layout_seed)
    others = [c for c in Color if c != task.target_color]
    picks = rng.permutation(len(others))[:task.num_distractors]
    colors = [task.target_color] + [others[i] for i in picks]
    x0, y0, x1, y1 = SPAWN_REGION
    positions: List[Tuple[float, float]] = []
    attempts = 0
    while (len(positions) < len(colors)):
        if (attempts >= LAYOUT_ATTEMPTS):
            raise LayoutError(f'no valid layout for seed {task.layout_seed} '
                              f'after {LAYOUT_ATTEMPTS} samples')
        attempts += 1
        x, y = float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1))
        if (math.dist((x, y), HOME) < MIN_HOME_DISTANCE):
            continue
        if (any(math.dist((x, y), p) < 2 * BLOCK_SIZE for p in positions)):
            continue
        positions.append((x, y))
    blocks = [Block(i, c, p[0], p[1])
              for i, (c, p) in enumerate(zip(colors, positions))]
    return WorldState(HOME, True, None, blocks)


def step(state: WorldState, action: Action) -> WorldState:
    """
    Advance the world by one action. The grip command is applied first:
    closing open fingers attaches the nearest free block within the grasp
    radius, opening releases the held block where it is. The clamped motion
    follows, and a held block tracks the gripper.
    """
    action = action.clamped()
    new = state.copy()
    new.step_count += 1
    gx, gy = new.gripper
    closing = action.closes()
    if (closing and new.gripper_open):
        new.gripper_open = False
        nearest, best = None, GRASP_RADIUS
        for b in new.blocks:
            d = math.dist((b.x, b.y), (gx, gy))
            if (d <= best):
                nearest, best = b, d
        if (nearest is not None):
            new.held = nearest.id
    elif (not closing and not new.gripper_open):
        new.gripper_open = True
        new.held = None
    gx, gy = _clip01(gx + action.dx), _clip01(gy + action.dy)
    new.gripper = (gx, gy)
    if (new.held is not None):
        held = new.block(new.held)
        held.x, held.y = gx, gy
    return new


def target_in_box(state: WorldState, task: TaskSpec) -> bool:
    target = state.block_of_color(task.target_color)
    return in_region(target.x, target.y, state.box_region)


def success(state: WorldState, task: TaskSpec) -> bool:
    """The target rests inside the box and is no longer held."""
    target = state.block_of_color(task.target_color)
    return state.held != target.id and target_in_box(state, task)
