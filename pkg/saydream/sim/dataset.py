"""
Dataset file: a little-endian binary file of expert trajectories.

Layout::

    magic        4 bytes  b'SDDS'
    version      u32      (currently 1)
    count        u32      number of episodes
    H, W         u16, u16 frame size
    per episode:
      target     u8       color index (red, blue, yellow, green)
      distract   u8       number of distractors
      seed       u64      layout seed
      max_steps  u16
      blocks     u8       B, then B x u8 color index (block id order)
      box        4 x f32  box region (x0, y0, x1, y1)
      T          u32      number of actions
      frames     (T+1) x H x W x 3 x u8, value = byte / 255
      actions    T x 3 x f32 (dx, dy, grip)
      annots     (T+1) x (4 + 2B) x f32
"""
import logging
import struct
from io import BytesIO
from multiprocessing import Pool
from typing import BinaryIO, List, Optional, Tuple
import numpy as np
from saydream.config import ExperimentConfig, stage_seed
from saydream.errors import DatasetError
from saydream.sim.expert import run_expert
from saydream.sim.trajectory import ANNOTATION_HEAD, Trajectory
from saydream.sim.world import Color, TaskSpec

logger = logging.getLogger(__name__)

MAGIC = b'SDDS'
VERSION = 1
_HEADER = '<4sIIHH'


def _write_trajectory(fh: BinaryIO, traj: Trajectory) -> None:
    task = traj.task
    fh.write(struct.pack('<BBQH', task.target_color.value,
                         task.num_distractors, task.layout_seed,
                         task.max_steps))
    fh.write(struct.pack('<B', len(traj.block_colors)))
    fh.write(bytes(c.value for c in traj.block_colors))
    fh.write(struct.pack('<4f', *traj.box_region))
    fh.write(struct.pack('<I', traj.length))
    frames = np.round(np.clip(traj.frames, 0.0, 1.0) * 255.0)
    fh.write(frames.astype(np.uint8).tobytes())
    fh.write(traj.actions.astype('<f4').tobytes())
    fh.write(traj.annotations.astype('<f4').tobytes())


def _read_exact(fh: BinaryIO, n: int, path: str) -> bytes:
    data = fh.read(n)
    if (len(data) != n):
        raise DatasetError(path, 'truncated dataset')
    return data


def _read_trajectory(fh: BinaryIO, height: int, width: int,
                     path: str) -> Trajectory:
    color, distractors, seed, max_steps = struct.unpack(
        '<BBQH', _read_exact(fh, 12, path))
    (num_blocks,) = struct.unpack('<B', _read_exact(fh, 1, path))
    colors = [Color(c) for c in _read_exact(fh, num_blocks, path)]
    box = struct.unpack('<4f', _read_exact(fh, 16, path))
    (length,) = struct.unpack('<I', _read_exact(fh, 4, path))
    n_frame = (length + 1) * height * width * 3
    frames = np.frombuffer(_read_exact(fh, n_frame, path), dtype=np.uint8)
    frames = frames.reshape(length + 1, height, width, 3) / 255.0
    actions = np.frombuffer(_read_exact(fh, 12 * length, path), dtype='<f4')
    cols = ANNOTATION_HEAD + 2 * num_blocks
    annots = np.frombuffer(_read_exact(fh, 4 * cols * (length + 1), path),
                           dtype='<f4')
    task = TaskSpec(Color(color), distractors, seed, max_steps)
    return Trajectory(task, colors, tuple(float(b) for b in box), frames,
                      actions.astype(np.float64).reshape(length, 3),
                      annots.astype(np.float64).reshape(length + 1, cols))


def dataset_bytes(trajectories: List[Trajectory], height: int,
                  width: int) -> bytes:
    buf = BytesIO()
    buf.write(struct.pack(_HEADER, MAGIC, VERSION, len(trajectories),
                          height, width))
    for traj in trajectories:
        _write_trajectory(buf, traj)
    return buf.getvalue()


def parse_dataset(data: bytes, path: str = '<bytes>') -> List[Trajectory]:
    fh = BytesIO(data)
    raw = fh.read(struct.calcsize(_HEADER))
    if (len(raw) != struct.calcsize(_HEADER)):
        raise DatasetError(path, 'truncated dataset header')
    magic, version, count, height, width = struct.unpack(_HEADER, raw)
    if (magic != MAGIC or version != VERSION):
        raise DatasetError(path, 'not a dataset file (bad magic/version)')
    return [_read_trajectory(fh, height, width, path) for _ in range(count)]


def write_dataset(path: str, trajectories: List[Trajectory], height: int,
                  width: int) -> None:
    """
    Raises:
      DatasetError: if `path` cannot be written.
    """
    try:
        with open(path, 'wb') as fh:
            fh.write(dataset_bytes(trajectories, height, width))
    except OSError as e:
        raise DatasetError(path, f'cannot write dataset: {e}')


def _read_file(path: str) -> bytes:
    try:
        with open(path, 'rb') as fh:
            return fh.read()
    except OSError as e:
        raise DatasetError(path, f'cannot read dataset: {e}')


def read_dataset(path: str) -> List[Trajectory]:
    return parse_dataset(_read_file(path), path)


def read_header(path: str) -> Tuple[int, int, int]:
    """Return the (episode count, H, W) declared by a dataset file."""
    try:
        with open(path, 'rb') as fh:
            raw = fh.read(struct.calcsize(_HEADER))
    except OSError as e:
        raise DatasetError(path, f'cannot read dataset: {e}')
    if (len(raw) != struct.calcsize(_HEADER)):
        raise DatasetError(path, 'truncated dataset header')
    magic, version, count, height, width = struct.unpack(_HEADER, raw)
    if (magic != MAGIC):
        raise DatasetError(path, 'not a dataset file')
    return count, height, width


def make_tasks(n_episodes: int, config: ExperimentConfig,
               stage: str = 'gen-data') -> List[TaskSpec]:
    """
    The task list of a dataset: target colors cycle through the configured
    colors (so the counts are balanced), distractor counts and layout seeds
    come from the stage's seed.
    """
    if (n_episodes < 1):
        raise ValueError('n_episodes must be at least 1')
    env = config.env
    colors = [Color.parse(c) for c in env.colors]
    rng = np.random.default_rng(stage_seed(config.seed, stage))
    tasks = []
    for i in range(n_episodes):
        distractors = int(rng.integers(env.min_distractors,
                                       env.max_distractors + 1))
        seed = int(rng.integers(0, 2 ** 63 - 1))
        tasks.append(TaskSpec(colors[i % len(colors)], distractors, seed,
                              env.max_steps))
    return tasks


def _expert_episode(args: Tuple[TaskSpec, int, int]) -> Trajectory:
    task, height, width = args
    return run_expert(task, height, width).quantized()


def generate_dataset(n_episodes: int, config: ExperimentConfig,
                     path: Optional[str] = None,
                     stage: str = 'gen-data') -> List[Trajectory]:
    """
    Record `n_episodes` expert episodes (in parallel when
    ``config.workers`` > 1) and write them to `path` if given.

    Returns:
      The trajectories exactly as they read back from the file.
    """
    tasks = make_tasks(n_episodes, config, stage)
    jobs = [(t, config.env.height, config.env.width) for t in tasks]
    if (config.workers > 1):
        with Pool(processes=config.workers) as pool:
            trajectories = pool.map(_expert_episode, jobs)
    else:
        trajectories = [_expert_episode(j) for j in jobs]
    failed = sum(not t.success() for t in trajectories)
    if (failed):
        logger.warning('%d of %d expert episodes did not finish', failed,
                       n_episodes)
    logger.info('generated %d episodes (mean length %.1f)', n_episodes,
                float(np.mean([t.length for t in trajectories])))
    if (path is not None):
        write_dataset(path, trajectories, config.env.height, config.env.width)
    return trajectories


def split_holdout(trajectories: List[Trajectory],
                  fraction: float) -> Tuple[List[Trajectory],
                                            List[Trajectory]]:
    """Split off the last `fraction` of episodes (at least one) as held-out."""
    n_hold = max(1, int(round(len(trajectories) * fraction)))
    if (n_hold >= len(trajectories)):
        return list(trajectories), list(trajectories)
    return trajectories[:-n_hold], trajectories[-n_hold:]
