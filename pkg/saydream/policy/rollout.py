"""
Closed-loop execution of the action model and the episode record file.

Episode record layout (little-endian)::

    magic       4 bytes  b'SDEP'
    version     u32      (currently 1)
    meta        u32 length + UTF-8 JSON
    dataset     u64 length + a one-episode dataset file
    clip        u16 n, u16 H, u16 W (n = 0 when no clip), then
                n x H x W x 3 x u8 frames
    latents     u8 flag, then (when set) 4 x u16 shape and f4 values
"""
from __future__ import annotations
import json
import logging
import struct
from io import BytesIO
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple
import numpy as np
from recordclass import RecordClass
from saydream.codec import Codec
from saydream.config import PolicyConfig
from saydream.diffusion.sampler import WorldModel
from saydream.errors import CheckpointError, DatasetError
from saydream.imagination import KeyframeClip, dream
from saydream.policy.net import PolicyInput, PolicyNet, predict_chunk
from saydream.policy.train import history_window
from saydream.sim.dataset import dataset_bytes, parse_dataset
from saydream.sim.render import render
from saydream.sim.trajectory import Controller, Trajectory, annotate
from saydream.sim.world import Action, TaskSpec, reset, step, success

logger = logging.getLogger(__name__)

MAGIC = b'SDEP'
VERSION = 1


class EpisodeRecord(RecordClass):
    """
    Args:
      trajectory: The executed episode.
      clip: The (first) imagined clip the policy was conditioned on.
      success: Whether the episode ended with the target in the box.
      meta: Seeds, tasks and checkpoint hashes.
    """
    trajectory: Trajectory
    clip: Optional[KeyframeClip]
    success: bool
    meta: Dict[str, Any]


def rollout(task: TaskSpec, policy: Optional[PolicyNet],
            world_model: Optional[WorldModel], codec: Optional[Codec],
            config: PolicyConfig, rng: Optional[np.random.Generator] = None,
            dream_task: Optional[TaskSpec] = None,
            imagined: Optional[KeyframeClip] = None,
            controller: Optional[Controller] = None,
            height: int = 32, width: int = 32) -> EpisodeRecord:
    """
    Run one episode closed-loop: dream once from the first observation (or
    again every `config.redream_interval` steps), then repeatedly build the
    policy input from the real observation history, predict a chunk and
    execute its first `config.execute` actions (all of them when 0), until
    success or the task's step limit.

    Args:
      task: The task executed in the simulator.
      policy: The action model; unused when `controller` is given.
      world_model: The world model dreaming the imagined clip.
      codec: The latent codec of the world model.
      config: The policy config section.
      rng: The dreaming generator.
      dream_task: The task the world model is asked to imagine (defaults to
        `task`; a different color gives the wrong-imagination ablation).
      imagined: A fixed imagined clip to use instead of dreaming.
      controller: A per-state controller replacing the policy, for harness
        checks of the simulator and scorers.

    Raises:
      CheckpointError: if the policy has no imagined clip source.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    dream_task = task if dream_task is None else dream_task
    can_dream = world_model is not None and codec is not None
    if (controller is None and imagined is None and not can_dream):
        raise CheckpointError('rollout needs a world model and codec or a '
                              'fixed imagined clip')
    state = reset(task)
    frames = [render(state, height, width)]
    annotations = [annotate(state)]
    actions: List[Tuple[float, float, float]] = []
    clip, redreams, since = imagined, 0, 0
    if (clip is None and can_dream):
        clip = dream(frames[0], dream_task, world_model, codec, rng=rng)
    first_clip = clip
    while (not success(state, task) and state.step_count < task.max_steps):
        if (controller is not None):
            chunk = [controller(state)]
        else:
            if (can_dream and imagined is None and
                    config.redream_interval > 0 and
                    since >= config.redream_interval):
                clip = dream(frames[-1], dream_task, world_model, codec,
                             rng=rng)
                redreams, since = redreams + 1, 0
            inp = PolicyInput(clip.frames,
                              history_window(frames, policy.k,
                                             config.history_mode),
                              annotations[-1][0:3])
            chunk = predict_chunk(inp, policy)
            chunk = chunk[:config.execute or len(chunk)]
        for action in chunk:
            if (success(state, task) or state.step_count >= task.max_steps):
                break
            action = Action(*action).clamped()
            state = step(state, action)
            actions.append(tuple(action))
            frames.append(render(state, height, width))
            annotations.append(annotate(state))
            since += 1
    colors = [b.color for b in sorted(state.blocks, key=lambda b: b.id)]
    traj = Trajectory(task, colors, state.box_region, np.stack(frames),
                      np.array(actions, dtype=np.float64).reshape(-1, 3),
                      np.stack(annotations))
    done = traj.success()
    meta = {'target': task.target_color.label(),
            'dream_target': dream_task.target_color.label(),
            'layout_seed': task.layout_seed, 'steps': traj.length,
            'redreams': redreams, 'success': done,
            'policy': 'controller' if controller is not None else 'net'}
    if (first_clip is not None and first_clip.meta):
        meta['sampler'] = first_clip.meta
    return EpisodeRecord(traj, first_clip, done, meta)


def _rollout_job(args: Tuple) -> EpisodeRecord:
    task, policy, world_model, codec, config, seed, dream_task, hw = args
    record = rollout(task, policy, world_model, codec, config,
                     np.random.default_rng(seed), dream_task,
                     height=hw[0], width=hw[1])
    record.meta['dream_seed'] = [int(s) for s in seed]
    return record


def rollout_many(tasks: Sequence[TaskSpec], policy: PolicyNet,
                 world_model: Optional[WorldModel], codec: Optional[Codec],
                 config: PolicyConfig, seed: int, workers: int = 1,
                 dream_tasks: Optional[Sequence[TaskSpec]] = None,
                 height: int = 32, width: int = 32) -> List[EpisodeRecord]:
    """
    Independent rollouts; episode `i` dreams with the generator seeded by
    (seed, i) so results do not depend on `workers`.
    """
    dream_tasks = dream_tasks if dream_tasks is not None else \
        [None] * len(tasks)
    jobs = [(task, policy, world_model, codec, config, [seed, i], dt,
             (height, width))
            for i, (task, dt) in enumerate(zip(tasks, dream_tasks))]
    if (workers > 1):
        with Pool(processes=workers) as pool:
            records = pool.map(_rollout_job, jobs)
    else:
        records = [_rollout_job(job) for job in jobs]
    rate = np.mean([r.success for r in records]) if records else 0.0
    logger.info('%d rollouts, success rate %.3f', len(records), rate)
    return records


def episode_bytes(record: EpisodeRecord) -> bytes:
    traj = record.trajectory
    buf = BytesIO()
    buf.write(struct.pack('<4sI', MAGIC, VERSION))
    meta = json.dumps(dict(record.meta, success=bool(record.success)),
                      sort_keys=True).encode('utf-8')
    buf.write(struct.pack('<I', len(meta)))
    buf.write(meta)
    height, width = traj.frames.shape[1:3]
    data = dataset_bytes([traj], height, width)
    buf.write(struct.pack('<Q', len(data)))
    buf.write(data)
    clip = record.clip
    if (clip is None):
        buf.write(struct.pack('<HHH', 0, height, width))
        buf.write(struct.pack('<B', 0))
        return buf.getvalue()
    frames = np.round(np.clip(clip.frames, 0.0, 1.0) * 255.0)
    buf.write(struct.pack('<HHH', *clip.frames.shape[:3]))
    buf.write(frames.astype(np.uint8).tobytes())
    if (clip.latents is None):
        buf.write(struct.pack('<B', 0))
    else:
        buf.write(struct.pack('<B4H', 1, *clip.latents.shape))
        buf.write(clip.latents.astype('<f4').tobytes())
    return buf.getvalue()


def _take(fh: BytesIO, n: int, path: str) -> bytes:
    data = fh.read(n)
    if (len(data) != n):
        raise DatasetError(path, 'truncated episode record')
    return data


def parse_episode(data: bytes, path: str = '<bytes>') -> EpisodeRecord:
    fh = BytesIO(data)
    magic, version = struct.unpack('<4sI', _take(fh, 8, path))
    if (magic != MAGIC or version != VERSION):
        raise DatasetError(path, 'not an episode record (bad magic/version)')
    (size,) = struct.unpack('<I', _take(fh, 4, path))
    meta = json.loads(_take(fh, size, path).decode('utf-8'))
    (size,) = struct.unpack('<Q', _take(fh, 8, path))
    trajs = parse_dataset(_take(fh, size, path), path)
    if (len(trajs) != 1):
        raise DatasetError(path, f'expected one episode, found {len(trajs)}')
    n, height, width = struct.unpack('<HHH', _take(fh, 6, path))
    clip = None
    if (n > 0):
        raw = _take(fh, n * height * width * 3, path)
        frames = np.frombuffer(raw, dtype=np.uint8).reshape(
            n, height, width, 3) / 255.0
        clip = KeyframeClip(frames, list(range(n)), None, None,
                            meta.get('sampler'))
    (flag,) = struct.unpack('<B', _take(fh, 1, path))
    if (flag and clip is not None):
        shape = struct.unpack('<4H', _take(fh, 8, path))
        raw = _take(fh, 4 * int(np.prod(shape)), path)
        clip.latents = np.frombuffer(raw, dtype='<f4').astype(
            np.float64).reshape(shape)
    return EpisodeRecord(trajs[0], clip, bool(meta['success']), meta)


def write_episode(path: str, record: EpisodeRecord) -> None:
    """
    Raises:
      DatasetError: if `path` cannot be written.
    """
    try:
        with open(path, 'wb') as fh:
            fh.write(episode_bytes(record))
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))


def read_episode(path: str) -> EpisodeRecord:
    try:
        with open(path, 'rb') as fh:
            data = fh.read()
    except OSError as e:
        raise DatasetError(path, e.strerror or str(e))
    return parse_episode(data, path)
