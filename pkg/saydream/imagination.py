"""
Keyframe compression of trajectories and the "dream" call that imagines a
keyframe video of a whole task from a single observation.
"""
from __future__ import annotations
import math
from typing import Any, Dict, List, Optional, Sequence
import numpy as np
from recordclass import RecordClass
from saydream.codec import Codec
from saydream.diffusion.precond import Conditioning
from saydream.diffusion.sampler import WorldModel
from saydream.errors import CheckpointError
from saydream.sim.trajectory import Trajectory
from saydream.sim.world import TaskSpec


class KeyframeClip(RecordClass):
    """
    Args:
      frames: [n, H, W, 3] frames (decoded frames for dreams).
      indices: The source frame index of every clip frame.
      source_T: Length of the source trajectory (None for dreams).
      latents: [n, 16, h, w] latents, when known.
      meta: Sampler metadata for dreams.
    """
    frames: np.ndarray
    indices: List[int]
    source_T: Optional[int] = None
    latents: Optional[np.ndarray] = None
    meta: Optional[Dict[str, Any]] = None

    @property
    def n(self) -> int:
        return len(self.frames)


def keyframe_indices(T: int, n: int) -> List[int]:
    """
    t_i = floor(i T / n) for i = 1..n, clamped below at 1 so indices always
    name one of the frames 1..T.
    """
    if (n < 1):
        raise ValueError(f'keyframe count must be >= 1, got {n}')
    if (T < 1):
        raise ValueError('cannot compress an empty trajectory')
    return [max(1, (i * T) // n) for i in range(1, n + 1)]


def compress_keyframes(frames: Sequence[np.ndarray], n: int) -> KeyframeClip:
    """
    Uniformly subsample the frames 1..T (``frames[0]`` is frame 1) to `n`
    keyframes; frames repeat when T < n.
    """
    indices = keyframe_indices(len(frames), n)
    clip = np.stack([frames[t - 1] for t in indices])
    return KeyframeClip(clip, indices, len(frames))


def training_clip(traj: Trajectory, n: int) -> KeyframeClip:
    """
    The world-model training clip of an episode: its first observation
    followed by n - 1 keyframes of the remaining frames. Indices refer to the
    episode's frames (0 is the first observation, T the last).
    """
    if (n < 2):
        raise ValueError(f'training clips need n >= 2, got {n}')
    if (traj.length < 1):
        raise ValueError('cannot compress an empty trajectory')
    rest = compress_keyframes(traj.frames[1:], n - 1)
    frames = np.concatenate([traj.frames[:1], rest.frames])
    return KeyframeClip(frames, [0] + rest.indices, traj.length)


def uniform_sample(count: int, k: int) -> List[int]:
    """
    `k` indices spread evenly over range(count), oldest first, always
    including the newest.
    """
    if (count < 1):
        raise ValueError('nothing to sample from')
    return [int(math.floor(i * (count - 1) / max(k - 1, 1)))
            if k > 1 else count - 1 for i in range(k)]


def dream(observation: np.ndarray, task: TaskSpec, world_model: WorldModel,
          codec: Codec, n: Optional[int] = None,
          rng: Optional[np.random.Generator] = None,
          seed: Optional[int] = None) -> KeyframeClip:
    """
    Imagine the keyframe video of `task` starting from `observation`.

    Args:
      observation: The [H, W, 3] current frame.
      task: The task; only its target color conditions the world model.
      world_model: The teacher or student world model.
      codec: The latent codec.
      n: The clip length; must match the world model (defaults to it).
      rng: The sampling generator (seeded from `seed` when absent).
      seed: Recorded in the clip metadata.

    Raises:
      CheckpointError: if codec and world model disagree on the latent
        shape or the clip length.
    """
    n = world_model.n_frames if n is None else n
    if (n != world_model.n_frames):
        raise CheckpointError(f'world model generates {world_model.n_frames} '
                              f'frames, {n} requested')
    latent = codec.encode(observation)
    if (tuple(latent.shape[1:]) != tuple(world_model.net.latent_hw)):
        raise CheckpointError(f'codec latent shape {latent.shape} does not '
                              f'match world model latent size '
                              f'{world_model.net.latent_hw}')
    rng = rng if rng is not None else np.random.default_rng(seed)
    cond = Conditioning.single(latent, task.target_color.value, n)
    latents, meta = world_model.sample(cond, rng, seed)
    frames = codec.decode(latents[0])
    return KeyframeClip(frames, list(range(n)), None, latents[0], meta)
