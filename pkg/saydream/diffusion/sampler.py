"""
Restart sampling: start from pure noise at the highest level, then alternate
a full denoised prediction with re-noising to the next lower level. The last
prediction (with the conditioning frame restored) is the sample.
"""
import logging
from typing import Any, Callable, Dict, Optional, Sequence, Tuple
import numpy as np
from saydream.autodiff import no_grad
from saydream.diffusion.denoiser import DenoiserNet, load_denoiser
from saydream.diffusion.precond import (Conditioning, apply_first_frame_cond,
                                        denoise)
from saydream.diffusion.schedule import DiscreteSchedule
from saydream.errors import warning

logger = logging.getLogger(__name__)

DenoiseFn = Callable[[np.ndarray, float, Conditioning], np.ndarray]


def net_denoiser(net: DenoiserNet) -> DenoiseFn:
    def fn(x_t: np.ndarray, sigma: float, cond: Conditioning) -> np.ndarray:
        with no_grad():
            return denoise(x_t, sigma, cond, net).data
    return fn


def restart_sample(denoiser: DenoiseFn, cond: Conditioning,
                   sigmas: Sequence[float],
                   rng: np.random.Generator) -> np.ndarray:
    """
    Args:
      denoiser: Maps (x_t, sigma, cond) to a denoised estimate.
      cond: The conditioning; fixes the [B, n, 16, h, w] output shape.
      sigmas: The noise levels in descending order; one denoiser call each.
      rng: The noise generator.
    """
    if (len(sigmas) == 0):
        raise ValueError('at least one sampling step is required')
    shape = cond.clip_shape()
    x = sigmas[0] * rng.standard_normal(shape)
    x0_hat = x
    for i, sigma in enumerate(sigmas):
        x0_hat = denoiser(x, sigma, cond)
        if (i + 1 < len(sigmas)):
            x = x0_hat + sigmas[i + 1] * rng.standard_normal(shape)
    return apply_first_frame_cond(x0_hat, cond)


def sampler_meta(schedule: DiscreteSchedule, seed: Optional[int],
                 trained: bool) -> Dict[str, Any]:
    meta = {'steps': schedule.steps, 'sigmas': schedule.descending(),
            'p': schedule.p, 'sigma_min': schedule.sigma_min,
            'sigma_max': schedule.sigma_max, 'seed': seed}
    if (not trained):
        meta['untrained'] = True
    return meta


def sample_clip(net: DenoiserNet, cond: Conditioning,
                schedule: DiscreteSchedule, rng: np.random.Generator,
                trained: bool = True,
                seed: Optional[int] = None) -> Tuple[np.ndarray,
                                                     Dict[str, Any]]:
    """
    Sample with `net` over the descending levels of `schedule`.

    Returns:
      The latent clip and the sampler metadata to store alongside it.
    """
    if (not trained):
        warning('sampling from an untrained world model')
    logger.debug('sampling %s clip(s) over %d levels',
                 cond.first_frame_latent.shape[0], schedule.steps)
    latents = restart_sample(net_denoiser(net), cond, schedule.descending(),
                             rng)
    return latents, sampler_meta(schedule, seed, trained)


def sample_teacher(cond: Conditioning, net: DenoiserNet, steps: int = 35,
                   rng: Optional[np.random.Generator] = None,
                   sigma_min: float = 0.002, sigma_max: float = 80.0,
                   p: float = 7.0, trained: bool = True) -> Tuple[
                       np.ndarray, Dict[str, Any]]:
    """The teacher's many-step sampler (35 levels by default)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    schedule = DiscreteSchedule(steps, p, sigma_min, sigma_max)
    return sample_clip(net, cond, schedule, rng, trained)


def sample_student(cond: Conditioning, student: DenoiserNet, steps: int = 8,
                   rng: Optional[np.random.Generator] = None,
                   sigma_min: float = 0.002, sigma_max: float = 80.0,
                   p: float = 7.0, trained: bool = True) -> Tuple[
                       np.ndarray, Dict[str, Any]]:
    """The distilled student's few-step sampler over its training levels."""
    rng = rng if rng is not None else np.random.default_rng(0)
    schedule = DiscreteSchedule(steps, p, sigma_min, sigma_max)
    return sample_clip(student, cond, schedule, rng, trained)


class WorldModel:
    """
    A trained denoiser together with the level schedule it samples over.

    Args:
      net: The denoiser network.
      schedule: The sampling schedule (35 levels for a teacher, the
        distillation levels for a student).
      kind: "teacher" or "student".
      trained: False for a freshly initialized network.
      source_hash: Content hash of the checkpoint the network came from.
    """
    def __init__(self, net: DenoiserNet, schedule: DiscreteSchedule,
                 kind: str = 'teacher', trained: bool = True,
                 source_hash: Optional[str] = None):
        self.net = net
        self.schedule = schedule
        self.kind = kind
        self.trained = trained
        self.source_hash = source_hash

    @property
    def n_frames(self) -> int:
        return self.net.n_frames

    def with_steps(self, steps: int) -> 'WorldModel':
        schedule = DiscreteSchedule(steps, self.schedule.p,
                                    self.schedule.sigma_min,
                                    self.schedule.sigma_max)
        return WorldModel(self.net, schedule, self.kind, self.trained,
                          self.source_hash)

    def sample(self, cond: Conditioning, rng: np.random.Generator,
               seed: Optional[int] = None) -> Tuple[np.ndarray,
                                                    Dict[str, Any]]:
        latents, meta = sample_clip(self.net, cond, self.schedule, rng,
                                    self.trained, seed)
        meta['world_model'] = self.kind
        if (self.source_hash is not None):
            meta['checkpoint'] = self.source_hash
        return latents, meta


def load_world_model(path: str, sample_steps: int, p: float = 7.0,
                     sigma_min: float = 0.002, sigma_max: float = 80.0,
                     source_hash: Optional[str] = None) -> WorldModel:
    """
    Load a teacher or student checkpoint. Students sample over the levels
    they were distilled on; teachers over `sample_steps` levels.
    """
    net, meta, _ = load_denoiser(path)
    kind = meta.get('kind', 'teacher')
    steps = int(meta['distill_steps']) if kind == 'student' else sample_steps
    schedule = DiscreteSchedule(steps, p, sigma_min, sigma_max)
    return WorldModel(net, schedule, kind, bool(meta.get('trained', True)),
                      source_hash)
