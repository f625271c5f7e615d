from saydream.sim.world import (Action, Block, Color, TaskSpec, WorldState,
                                reset, step, success)
from saydream.sim.render import render
from saydream.sim.expert import scripted_expert, run_expert
from saydream.sim.trajectory import Trajectory, annotate, collect
from saydream.sim.dataset import (generate_dataset, read_dataset,
                                  write_dataset, read_header)

__all__ = [
    'Action',
    'Block',
    'Color',
    'TaskSpec',
    'WorldState',
    'reset',
    'step',
    'success',
    'render',
    'scripted_expert',
    'run_expert',
    'Trajectory',
    'annotate',
    'collect',
    'generate_dataset',
    'read_dataset',
    'write_dataset',
    'read_header',
]
