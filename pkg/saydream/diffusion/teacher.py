"""
Teacher world-model training: denoise log-normally noised keyframe clips
under the weighted reconstruction loss, with resumable checkpoints.
"""
from __future__ import annotations
import json
import logging
from typing import Any, Dict, List, Optional, TextIO
import numpy as np
from recordclass import RecordClass
from saydream.autodiff import Adam, no_grad
from saydream.autodiff.optim import get_schedule
from saydream.codec import Codec
from saydream.config import WorldModelConfig
from saydream.diffusion.denoiser import (DenoiserNet, load_denoiser,
                                         save_denoiser)
from saydream.diffusion.precond import (Conditioning, denoise, recon_loss,
                                        sample_sigma_lognormal)
from saydream.errors import DivergenceError, NonFiniteError
from saydream.imagination import training_clip
from saydream.sim.trajectory import Trajectory

logger = logging.getLogger(__name__)


class ClipSet(RecordClass):
    """Encoded training clips: latents [N, n, 16, h, w] and task ids [N]."""
    latents: np.ndarray
    tasks: np.ndarray

    def __len__(self) -> int:
        return len(self.tasks)

    def batch(self, idx: np.ndarray):
        latents = self.latents[idx]
        cond = Conditioning(latents[:, 0], self.tasks[idx], latents.shape[1])
        return latents, cond


def build_clip_set(trajectories: List[Trajectory], codec: Codec,
                   n: int) -> ClipSet:
    latents = np.stack([codec.encode(training_clip(t, n).frames)
                        for t in trajectories])
    tasks = np.array([t.task.target_color.value for t in trajectories],
                     dtype=np.int64)
    return ClipSet(latents, tasks)


def build_denoiser(clips: ClipSet, config: WorldModelConfig,
                   rng: np.random.Generator) -> DenoiserNet:
    return DenoiserNet(config.n_frames, tuple(clips.latents.shape[-2:]),
                       config.width, config.heads, config.blocks, rng=rng)


def _rng_state(rng: np.random.Generator) -> Dict[str, Any]:
    return rng.bit_generator.state


def _restore_rng(state: Dict[str, Any]) -> np.random.Generator:
    bit_gen = getattr(np.random, state['bit_generator'])()
    bit_gen.state = state
    return np.random.Generator(bit_gen)


def diffusion_loss(net: DenoiserNet, x0: np.ndarray, cond: Conditioning,
                   sigma: np.ndarray, eps: np.ndarray):
    x_t = x0 + sigma.reshape(-1, 1, 1, 1, 1) * eps
    return recon_loss(denoise(x_t, sigma, cond, net), x0, sigma)


class TeacherTrainer:
    """
    Args:
      clips: The training clips.
      config: The world-model section of the experiment config.
      seed: Seed of the initialization and the training stream.
      net: An existing network to continue from.
    """
    def __init__(self, clips: ClipSet, config: WorldModelConfig,
                 seed: int = 0, net: Optional[DenoiserNet] = None):
        self.clips = clips
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.net = net if net is not None else \
            build_denoiser(clips, config, self.rng)
        self.optim = Adam(self.net.named_parameters(), lr=config.lr,
                          weight_decay=config.weight_decay)
        self.schedule = get_schedule(config.lr_schedule, config.cycle_length)
        self.step_count = 0
        self.history: List[float] = []

    def step(self) -> float:
        cfg = self.config
        idx = self.rng.integers(0, len(self.clips), size=cfg.batch_size)
        x0, cond = self.clips.batch(idx)
        sigma = sample_sigma_lognormal(self.rng, cfg.p_mean, cfg.p_std,
                                       size=cfg.batch_size)
        eps = self.rng.standard_normal(x0.shape)
        self.optim.state.lr = cfg.lr * self.schedule(self.step_count)
        self.optim.zero_grad()
        try:
            loss = diffusion_loss(self.net, x0, cond, sigma, eps)
        except NonFiniteError as e:
            raise DivergenceError(f'teacher loss diverged at step '
                                  f'{self.step_count}: {e}')
        loss.backward()
        self.optim.step()
        self.step_count += 1
        value = loss.item()
        self.history.append(value)
        return value

    def run(self, iterations: int, checkpoint: Optional[str] = None,
            log: Optional[TextIO] = None,
            meta: Optional[Dict[str, Any]] = None) -> List[float]:
        """
        Train until `iterations` total steps, logging every
        ``log_every`` steps and checkpointing every ``checkpoint_every``
        steps and at the end.
        """
        cfg = self.config
        while (self.step_count < iterations):
            loss = self.step()
            if (self.step_count % cfg.log_every == 0 or
                    self.step_count == iterations):
                logger.info('teacher step %d: loss %.6f', self.step_count,
                            loss)
                if (log is not None):
                    log.write(json.dumps({'step': self.step_count,
                                          'loss': loss,
                                          'lr': self.optim.state.lr}) + '\n')
            if (checkpoint is not None and
                    self.step_count % cfg.checkpoint_every == 0):
                self.save(checkpoint, meta)
        if (checkpoint is not None):
            self.save(checkpoint, meta)
        return self.history

    def save(self, path: str, meta: Optional[Dict[str, Any]] = None) -> None:
        meta = dict(meta or {})
        meta.update({'kind': 'teacher', 'step': self.step_count,
                     'adam_step': self.optim.state.step,
                     'rng_state': _rng_state(self.rng),
                     'trained': self.step_count > 0})
        save_denoiser(path, 'teacher', self.net, meta,
                      self.optim.state.arrays())

    @classmethod
    def resume(cls, path: str, clips: ClipSet,
               config: WorldModelConfig) -> TeacherTrainer:
        """Continue a run bit-exactly from a teacher checkpoint."""
        net, meta, extra = load_denoiser(path, 'teacher')
        trainer = cls(clips, config, net=net)
        trainer.rng = _restore_rng(meta['rng_state'])
        trainer.optim.state.load_arrays(extra)
        trainer.optim.state.step = int(meta['adam_step'])
        trainer.step_count = int(meta['step'])
        return trainer


def train_teacher(clips: ClipSet, config: WorldModelConfig, seed: int = 0,
                  checkpoint: Optional[str] = None,
                  log: Optional[TextIO] = None,
                  meta: Optional[Dict[str, Any]] = None) -> TeacherTrainer:
    trainer = TeacherTrainer(clips, config, seed)
    trainer.run(config.iterations, checkpoint, log, meta)
    return trainer


def evaluate_loss(net: DenoiserNet, clips: ClipSet,
                  rng: np.random.Generator, batches: int = 4,
                  batch_size: int = 4) -> float:
    """Mean weighted reconstruction loss on freshly noised clips."""
    losses = []
    with no_grad():
        for _ in range(batches):
            idx = rng.integers(0, len(clips), size=batch_size)
            x0, cond = clips.batch(idx)
            sigma = sample_sigma_lognormal(rng, size=batch_size)
            eps = rng.standard_normal(x0.shape)
            losses.append(diffusion_loss(net, x0, cond, sigma, eps).item())
    return float(np.mean(losses))
