from functools import lru_cache
from typing import List, Tuple
import numpy as np
from saydream.codec import Codec
from saydream.config import ExperimentConfig
from saydream.diffusion.denoiser import DenoiserNet
from saydream.diffusion.sampler import WorldModel
from saydream.diffusion.schedule import DiscreteSchedule
from saydream.sim.dataset import make_tasks
from saydream.sim.expert import run_expert
from saydream.sim.trajectory import Trajectory

SMALL = 16


def tiny_config(seed: int = 0, **sections) -> ExperimentConfig:
    """A config small enough for unit tests; `sections` override it."""
    values = {
        'env': {'height': SMALL, 'width': SMALL, 'episodes': 6,
                'holdout_fraction': 0.34},
        'codec': {'epochs': 2, 'batch_size': 32},
        'wm': {'n_frames': 4, 'width': 8, 'heads': 2, 'blocks': 2,
               'iterations': 3, 'batch_size': 2, 'sample_steps': 3,
               'checkpoint_every': 2, 'log_every': 1},
        'distill': {'steps': 2, 'head_channels': 4, 'iterations': 2,
                    'batch_size': 2, 'log_every': 1},
        'policy': {'history': 2, 'chunk': 3, 'q': 1.0, 'width': 8,
                   'layers': 1, 'heads': 2, 'iterations': 2,
                   'batch_size': 2},
        'eval': {'episodes': 2, 'ablation_steps': [1, 2],
                 'ablation_clips': 2, 'ffd_dims': 4},
    }
    for name, override in sections.items():
        values.setdefault(name, {}).update(override)
    values['seed'] = seed
    return ExperimentConfig.from_dict(values)


@lru_cache(maxsize=None)
def _expert_cached(count: int, seed: int, size: int) -> Tuple[Trajectory, ...]:
    config = tiny_config(seed, env={'height': size, 'width': size})
    return tuple(run_expert(t, size, size).quantized()
                 for t in make_tasks(count, config))


def expert_trajectories(count: int = 4, seed: int = 0,
                        size: int = SMALL) -> List[Trajectory]:
    """Expert episodes of the tiny config; cached across tests."""
    return list(_expert_cached(count, seed, size))


def identity_codec() -> Codec:
    """The exact round trip codec on 16 x 16 frames (factor 2)."""
    return Codec(2, np.random.default_rng(0), orthogonal=True)


def tiny_world_model(n_frames: int = 4, steps: int = 2,
                     size: int = SMALL) -> WorldModel:
    net = DenoiserNet(n_frames, (size // 2, size // 2), width=8, heads=2,
                      blocks=2, rng=np.random.default_rng(0))
    return WorldModel(net, DiscreteSchedule(steps), 'teacher', True)
