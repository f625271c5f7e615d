"""
Behavior cloning of the action model on expert episodes, with the imagined
keyframes drawn from the ground-truth clip with probability q and from a
cached world-model dream otherwise.
"""
import json
import logging
from typing import List, Optional, Sequence, TextIO, Tuple
import numpy as np
from deprecated.sphinx import versionadded
from saydream.autodiff import Adam, no_grad, functional as F
from saydream.codec import Codec
from saydream.config import PolicyConfig
from saydream.diffusion.sampler import WorldModel
from saydream.errors import CheckpointError, DivergenceError, NonFiniteError
from saydream.imagination import dream, training_clip, uniform_sample
from saydream.policy.net import IDLE_ACTION, PolicyNet, normalize_actions
from saydream.sim.trajectory import Trajectory

logger = logging.getLogger(__name__)


@versionadded(version='0.2.0', reason='"uniform" history mode')
def history_indices(count: int, k: int, mode: str = 'recent') -> List[int]:
    """
    Indices of the `k` history frames out of the `count` frames observed so
    far, oldest first. "recent" takes the last k frames and repeats the
    first frame while fewer than k exist; "uniform" spreads k indices over
    the whole history.
    """
    if (mode == 'recent'):
        start = count - k
        return [max(i, 0) for i in range(start, count)]
    elif (mode == 'uniform'):
        return uniform_sample(count, k)
    raise ValueError(f'Unknown history mode "{mode}"')


def history_window(frames: Sequence[np.ndarray], k: int,
                   mode: str = 'recent') -> np.ndarray:
    return np.stack([frames[i] for i in history_indices(len(frames), k,
                                                        mode)])


def chunk_targets(actions: np.ndarray, s: int, m: int) -> np.ndarray:
    """The next `m` actions from step `s`, padded with the idle action."""
    out = np.tile(np.array(IDLE_ACTION), (m, 1))
    part = actions[s:s + m]
    out[:len(part)] = part
    return out


class PolicyDataset:
    """
    Per-episode ground-truth clips and (optionally) cached dreams; samples
    batches of policy inputs with chunk targets.
    """
    def __init__(self, trajectories: List[Trajectory], n: int, k: int, m: int,
                 q: float, history_mode: str = 'recent',
                 dreams: Optional[List[np.ndarray]] = None):
        if (q < 1.0 and dreams is None):
            raise CheckpointError('a world model is required when q < 1')
        self.trajectories = trajectories
        self.n, self.k, self.m, self.q = n, k, m, q
        self.history_mode = history_mode
        self.truth = [training_clip(t, n).frames for t in trajectories]
        self.dreams = dreams
        self.steps = [(e, s) for e, t in enumerate(trajectories)
                      for s in range(t.length)]

    def sample(self, rng: np.random.Generator,
               batch_size: int) -> Tuple[np.ndarray, ...]:
        picks = rng.integers(0, len(self.steps), size=batch_size)
        use_truth = rng.random(batch_size) < self.q
        imagined, history, proprio, targets = [], [], [], []
        for pick, truth in zip(picks, use_truth):
            e, s = self.steps[pick]
            traj = self.trajectories[e]
            imagined.append(self.truth[e] if truth else self.dreams[e])
            idx = history_indices(s + 1, self.k, self.history_mode)
            history.append(traj.frames[idx])
            proprio.append(traj.annotations[s, 0:3])
            targets.append(chunk_targets(traj.actions, s, self.m))
        return (np.stack(imagined), np.stack(history), np.stack(proprio),
                normalize_actions(np.stack(targets)))


def cache_dreams(trajectories: List[Trajectory], world_model: WorldModel,
                 codec: Codec, seed: int) -> List[np.ndarray]:
    """One dream per episode, from its first observation."""
    out = []
    for i, traj in enumerate(trajectories):
        rng = np.random.default_rng([seed, i])
        clip = dream(traj.frames[0], traj.task, world_model, codec, rng=rng)
        out.append(clip.frames)
    return out


def train_policy(trajectories: List[Trajectory], config: PolicyConfig,
                 n: int, world_model: Optional[WorldModel] = None,
                 codec: Optional[Codec] = None, seed: int = 0,
                 log: Optional[TextIO] = None,
                 net: Optional[PolicyNet] = None) -> Tuple[PolicyNet,
                                                            List[float]]:
    """
    Behavior cloning with an mse loss on normalized chunk targets.

    Raises:
      CheckpointError: if q < 1 and no world model (or codec) is given.
      DivergenceError: if the loss becomes non-finite.
    """
    if (config.q < 1.0 and (world_model is None or codec is None)):
        raise CheckpointError('a world-model checkpoint is required when '
                              f'policy.q = {config.q} < 1')
    rng = np.random.default_rng(seed)
    dreams = None
    if (config.q < 1.0):
        dreams = cache_dreams(trajectories, world_model, codec, seed)
    data = PolicyDataset(trajectories, n, config.history, config.chunk,
                         config.q, config.history_mode, dreams)
    frame_hw = trajectories[0].frames.shape[1:3]
    net = net if net is not None else PolicyNet(
        frame_hw, n, config.history, config.chunk, config.width,
        config.layers, config.heads, rng)
    optim = Adam(net.named_parameters(), lr=config.lr)
    history: List[float] = []
    for it in range(1, config.iterations + 1):
        imagined, hist, proprio, targets = data.sample(rng,
                                                       config.batch_size)
        optim.zero_grad()
        try:
            loss = F.mse(net(imagined, hist, proprio), targets)
        except NonFiniteError as e:
            raise DivergenceError(f'policy loss diverged at step {it}: {e}')
        loss.backward()
        optim.step()
        history.append(loss.item())
        if (log is not None):
            log.write(json.dumps({'step': it, 'loss': history[-1]}) + '\n')
        if (it % 50 == 0 or it == config.iterations):
            logger.info('policy step %d: loss %.6f', it, history[-1])
    return net, history


def evaluate_policy_loss(net: PolicyNet, trajectories: List[Trajectory],
                         config: PolicyConfig, n: int, seed: int = 0,
                         batches: int = 4) -> float:
    """Chunk mse on ground-truth imagination (e.g. on held-out episodes)."""
    data = PolicyDataset(trajectories, n, config.history, config.chunk, 1.0,
                         config.history_mode)
    rng = np.random.default_rng(seed)
    losses = []
    with no_grad():
        for _ in range(batches):
            imagined, hist, proprio, targets = data.sample(rng,
                                                           config.batch_size)
            losses.append(F.mse(net(imagined, hist, proprio),
                                targets).item())
    return float(np.mean(losses))
